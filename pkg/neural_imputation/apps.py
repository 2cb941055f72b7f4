from django.apps import AppConfig


class NeuralImputationConfig(AppConfig):
    name = 'neural_imputation'
    verbose_name = 'Neural electrode imputation'

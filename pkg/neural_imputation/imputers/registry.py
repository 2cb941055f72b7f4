"""
Imputer Registry Module

Provides a central registry for imputation methods.
Imputers are registered when their modules are imported, so the commands
can look them up by the name passed to --model.
"""

from typing import Dict, Type

from ..exceptions import ConfigurationError
from .base import BaseImputer


class ImputerRegistry:
    """
    Central registry for all imputers.

    Usage:
        # Register an imputer
        ImputerRegistry.register(ZeroImputer)

        # Create a fresh imputer instance
        imputer = ImputerRegistry.create('baseline', k=3)

        # List all available imputers
        imputers = ImputerRegistry.list_imputers()
    """

    _imputers: Dict[str, Type[BaseImputer]] = {}

    @classmethod
    def register(cls, imputer_class: Type[BaseImputer]) -> Type[BaseImputer]:
        """
        Register an imputer class with the registry.
        Can be used as a decorator.
        """
        if not getattr(imputer_class, 'IMPUTER_NAME', None):
            raise ValueError(f"Imputer class {imputer_class.__name__} must define IMPUTER_NAME")
        cls._imputers[imputer_class.IMPUTER_NAME.lower()] = imputer_class
        return imputer_class

    @classmethod
    def get_class(cls, name: str) -> Type[BaseImputer]:
        name = name.lower()
        if name not in cls._imputers:
            available = ", ".join(sorted(cls._imputers))
            raise ConfigurationError(
                f"Imputer '{name}' not found. Available imputers: {available or 'none registered'}"
            )
        return cls._imputers[name]

    @classmethod
    def create(cls, name: str, **kwargs) -> BaseImputer:
        """
        Instantiate an imputer by name.

        Fitted imputers carry dataset state, so every call returns a new
        instance.
        """
        return cls.get_class(name)(**kwargs)

    @classmethod
    def list_imputers(cls) -> Dict[str, str]:
        """Map registered names to descriptions."""
        return {name: imputer.IMPUTER_DESCRIPTION for name, imputer in sorted(cls._imputers.items())}


"""Generate a synthetic ragged dataset and its ground-truth sidecar."""

import dataclasses

from ...runs import derive_seed
from ...services.ragged_store import save_dataset
from ...services.synth_generator import generate_dataset, save_ground_truth
from ..base import DATA_DIR, ExperimentCommand, stage_files


class Command(ExperimentCommand):
    help = 'Generate a synthetic multi-day, multi-participant recording'
    stage = 'generate'

    def run_stage(self, cfg, run, source, options):
        seed = derive_seed(cfg.seed, self.stage)
        generator = dataclasses.replace(cfg.generator, seed=seed)
        recording, geometry, truth = generate_dataset(generator)

        data_dir = run.stage_dir(DATA_DIR)
        save_dataset(str(data_dir), recording, geometry)
        truth_dir = run.stage_dir('ground_truth')
        save_ground_truth(truth, str(truth_dir))

        paths = stage_files(data_dir) + stage_files(truth_dir)
        run.record(self.stage, {'generator': generator.to_dict()}, {'generator': seed}, paths)
        return paths

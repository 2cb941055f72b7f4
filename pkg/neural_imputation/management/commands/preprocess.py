"""Run Procedure A or B over a raw dataset."""

from ...services.signal_pipeline import PipelineConfig, SignalPipeline
from ..base import PREPARED_DIR, ExperimentCommand, stage_files


class Command(ExperimentCommand):
    help = 'Turn a raw dataset into fixed-length model instances'
    stage = 'preprocess'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', help='Raw dataset directory (default: <run>/data)')
        parser.add_argument('--procedure', choices=PipelineConfig.PROCEDURES,
                            help='Override the configured procedure')

    def run_stage(self, cfg, run, source, options):
        pipeline_cfg = cfg.pipeline
        if options.get('procedure'):
            pipeline_cfg = PipelineConfig.from_dict({**pipeline_cfg.to_dict(), 'procedure': options['procedure']})
        recording, _ = self.load_raw(source, options)
        prepared = SignalPipeline(pipeline_cfg).run(recording)

        out = run.stage_dir(PREPARED_DIR)
        prepared.save(str(out))
        paths = stage_files(out)
        run.record(self.stage, {'pipeline': pipeline_cfg.to_dict()}, {}, paths)
        return paths

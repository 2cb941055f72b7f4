"""Collect evaluation and decoding outputs into tables and figures."""

from ...exceptions import ConfigurationError
from ...services.decoding import DecodingResult
from ...services.evaluation import EvalReport
from ...services.reporting import emit_report
from ..base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Write summary tables and SVG figures for a run'
    stage = 'report'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--baseline', default='baseline', help='Method the scatter plots compare against')

    def run_stage(self, cfg, run, source, options):
        eval_dir = source.root / 'evaluate'
        decode_dir = source.root / 'decode'
        reports = [
            EvalReport.load(str(eval_dir), path.name[:-len('.report.json')])
            for path in sorted(eval_dir.glob('*.report.json'))
        ]
        decoding = [
            DecodingResult.load(str(decode_dir), path.name[len('decoding.'):-len('.summary.csv')])
            for path in sorted(decode_dir.glob('decoding.*.summary.csv'))
        ]
        if not reports and not decoding:
            raise ConfigurationError(f"No evaluation or decoding results under {source.root}")
        paths = emit_report(reports, str(run.stage_dir(self.stage)), options['baseline'], decoding)
        run.record(self.stage, {'baseline': options['baseline'],
                                'methods': sorted(r.method for r in reports)}, {}, paths)
        return paths

import numpy as np

from ...formats import export_pgm, write_csv, write_image
from ...sampler import chain_rngs, ula_run
from ...solver import DataTerm, apgd
from ..base import ReconstructionCommand


class Command(ReconstructionCommand):
    help = 'Draw prior samples with long Langevin chains and descend to the energy minimum'
    config_flags = {'steps': 'steps', 'chains': 'n_chains'}

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', help='Trained TEBM model')
        parser.add_argument('--steps', type=int, help='Chain length (e.g. 40000)')
        parser.add_argument('--chains', type=int, help='Number of independent chains')
        parser.add_argument('--tap-stride', type=int, default=0,
                            help='Save every n-th state of the first chain')

    def run(self, context, config, options):
        model = self.load_model(options, config)
        rng = np.random.default_rng(config.seed)
        start = rng.uniform(0.0, 1.0, size=(config.n_chains,) + config.image_size)
        tap_stride = options.get('tap_stride') or 0

        def tap(step, x):
            write_image(context.path(f'trajectory/step_{step:06d}.timg'), x[0])

        samples = ula_run(start, model.grad_input, config.sampler(),
                          chain_rngs(config.seed, config.n_chains),
                          tap=tap if tap_stride else None, tap_stride=max(tap_stride, 1))
        for index, sample in enumerate(samples):
            write_image(context.path(f'sample_{index:03d}.timg'), sample)
        export_pgm(context.path('sample_000.pgm'), samples[0])

        # Mode finding: D = 0, start from the same noise as chain 0.
        term = DataTerm.none(config.image_size)
        mode, log = apgd(term, model, start[0], config.solver())
        write_image(context.path('mode.timg'), mode)
        export_pgm(context.path('mode.pgm'), mode)
        write_csv(context.path('mode_log.csv'), log)
        if log:
            self.report(f"energy from noise {model.energy(start[0]):.4f} to mode {log[-1].energy:.4f}")

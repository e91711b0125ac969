import numpy as np

from ...energy_model import build_model
from ...exceptions import DivergenceError
from ...formats import read_checkpoint, write_checkpoint, write_csv
from ...phantoms import discs_dataset
from ...tensor_core import runtime_dtype
from ...trainer import energy_gap, train
from ..base import ReconstructionCommand


class Command(ReconstructionCommand):
    help = 'Maximum-likelihood training of the energy model with persistent Langevin chains'
    config_flags = {'steps': 'n_steps', 'n_f': 'n_f'}

    def add_command_arguments(self, parser):
        parser.add_argument('--dataset', help='TIMG file or directory (default: generated discs)')
        parser.add_argument('--steps', type=int, help='Number of parameter updates')
        parser.add_argument('--n-f', dest='n_f', type=int, help='Base feature count')
        parser.add_argument('--init', help='Resume from this TEBM checkpoint')

    def run(self, context, config, options):
        if options.get('dataset'):
            dataset = self.load_dataset(options['dataset'])
        else:
            dataset = discs_dataset(config.dataset_size, config.size, config.seed)
        if options.get('init'):
            model = read_checkpoint(options['init'], runtime_dtype())
        else:
            model = build_model(config.n_f, config.image_size, config.seed, config.leak,
                                config.temperature, runtime_dtype())
        cfg = config.trainer()
        checkpoint_path = context.path('model.tebm')
        context.extra['sampler_clamp'] = cfg.sampler.clamp

        def checkpoint(current, step):
            write_checkpoint(checkpoint_path, current)
            context.extra['checkpoint_step'] = step

        try:
            model, records = train(dataset, cfg, model, checkpoint=checkpoint)
        except DivergenceError:
            self.stderr.write(f"training diverged; last good model saved to {checkpoint_path}")
            raise
        if cfg.n_steps == 0:
            write_checkpoint(checkpoint_path, model)
        write_csv(context.path('training_log.csv'), records,
                  ['step', 'energy_plus', 'energy_minus', 'grad_norm', 'wall_time', 'clipped'])

        data_energy, noise_energy = energy_gap(model, dataset, np.random.default_rng(config.seed))
        context.extra['energy_gap'] = {'data': data_energy, 'noise': noise_energy}
        self.report(f"mean energy: data {data_energy:.4f}, uniform noise {noise_energy:.4f}")

import numpy as np

from ...formats import export_pgm, write_csv, write_image
from ...solver import map_reconstruct
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'MAP reconstruction with the learned regularizer'
    config_flags = {'problem': 'problem', 'ntheta': 'n_angles', 'iterations': 'iterations'}

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', help='Trained TEBM model')
        parser.add_argument('--sinogram', help='Input TSIN sinogram')
        parser.add_argument('--problem', help='few-view, limited-angle or full')
        parser.add_argument('--ntheta', type=int, help='Expected number of projection angles')
        parser.add_argument('--iterations', type=int)

    def run(self, context, config, options):
        model = self.load_model(options, config)
        sinogram = self.load_sinogram(require(options, 'sinogram'), config)
        if config.get('n_angles') and sinogram.geometry.n_angles != config.n_angles:
            self.stderr.write(f"sinogram has {sinogram.geometry.n_angles} angles, "
                              f"--ntheta says {config.n_angles}")
        sigma2 = config.noise_variance(np.max(sinogram.values))
        image, log = map_reconstruct(sinogram, 'tomographic', model, config.solver(), sigma2)
        context.extra['sigma2'] = sigma2
        write_image(context.path('reconstruction.timg'), image)
        export_pgm(context.path('reconstruction.pgm'), image)
        write_csv(context.path('iterate_log.csv'), log)
        if log:
            self.report(f"{len(log)} iterations, final energy {log[-1].energy:.6e}")

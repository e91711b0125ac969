from ...formats import write_sinogram
from ...tomography import add_noise
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'Add Gaussian noise relative to the sinogram maximum'
    config_flags = {'level': 'noise_level'}

    def add_command_arguments(self, parser):
        parser.add_argument('--sinogram', help='Input TSIN sinogram')
        parser.add_argument('--level', type=float, help='Noise standard deviation / max(sinogram)')

    def run(self, context, config, options):
        sinogram = self.load_sinogram(require(options, 'sinogram'), config)
        noisy = add_noise(sinogram, config.noise_level, config.seed)
        write_sinogram(context.path('sinogram.tsin'), noisy)
        self.report(f"added {config.noise_level:g} relative noise")

from ...formats import write_csv
from ...phantoms import discs_dataset
from ...posterior import ood_denoise_sweep
from ..base import ReconstructionCommand

DEFAULT_ANGLES = '0,5,10,20,30,40'
DEFAULT_LEVEL = 0.1


class Command(ReconstructionCommand):
    help = 'Denoising PSNR of rotated inputs as a function of the rotation angle'
    config_flags = {'level': 'noise_level'}

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', help='Trained TEBM model')
        parser.add_argument('--dataset', help='TIMG file or directory (default: generated discs)')
        parser.add_argument('--angles', default=DEFAULT_ANGLES,
                            help='Comma-separated rotation angles in degrees')
        parser.add_argument('--images', type=int, default=10, help='Images per angle')
        parser.add_argument('--level', type=float, help='Relative noise level (default 0.1)')

    def run(self, context, config, options):
        model = self.load_model(options, config)
        if options.get('dataset'):
            images = self.load_dataset(options['dataset'])[:options['images']]
        else:
            images = discs_dataset(options['images'], config.size, config.seed + 1)
        angles = [float(a) for a in options['angles'].split(',') if a.strip()]
        level = config.noise_level if config.is_set('noise_level') else DEFAULT_LEVEL
        context.extra['noise_level'] = level
        points = ood_denoise_sweep(images, model, angles, level, config.solver(), config.seed,
                                   temperature=config.beta)
        write_csv(context.path('ood_sweep.csv'), points, ['degrees', 'psnr', 'reference_psnr'])
        for point in points:
            self.report(f"{point.degrees:6.1f} deg  {point.psnr:7.2f} dB")

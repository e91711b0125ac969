from ...classical import sart
from ...formats import export_pgm, write_image
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'SART reconstruction'
    config_flags = {'iterations': 'sart_iterations', 'relax': 'sart_relax',
                    'blocks': 'sart_blocks'}

    def add_command_arguments(self, parser):
        parser.add_argument('--sinogram', help='Input TSIN sinogram')
        parser.add_argument('--iterations', type=int)
        parser.add_argument('--relax', type=float)
        parser.add_argument('--blocks', help="'all' (simultaneous) or 'angle'")

    def run(self, context, config, options):
        sinogram = self.load_sinogram(require(options, 'sinogram'), config)
        image = sart(sinogram, config.sart_iterations, config.sart_relax,
                     nonneg=config.sart_nonneg, blocks=config.sart_blocks)
        write_image(context.path('sart.timg'), image)
        export_pgm(context.path('sart.pgm'), image)

from ...formats import export_pgm, write_image
from ...tomography import fbp
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'Filtered backprojection of a sinogram'
    config_flags = {'filter': 'filter'}

    def add_command_arguments(self, parser):
        parser.add_argument('--sinogram', help='Input TSIN sinogram')
        parser.add_argument('--filter', help='ram-lak or none')

    def run(self, context, config, options):
        sinogram = self.load_sinogram(require(options, 'sinogram'), config)
        image = fbp(sinogram, config.filter)
        write_image(context.path('fbp.timg'), image)
        export_pgm(context.path('fbp.pgm'), image)

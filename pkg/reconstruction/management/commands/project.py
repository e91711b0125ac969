from ...formats import write_sinogram
from ...tomography import forward_project
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'Project an image into a parallel-beam sinogram'
    config_flags = {'ntheta': 'n_angles', 'problem': 'problem'}

    def add_command_arguments(self, parser):
        parser.add_argument('--image', help='Input TIMG image')
        parser.add_argument('--ntheta', type=int, help='Number of projection angles')
        parser.add_argument('--problem', help='few-view, limited-angle or full')

    def run(self, context, config, options):
        image = self.load_image(require(options, 'image', 'input image'))
        geometry = config.geometry()
        sinogram = forward_project(image, geometry)
        write_sinogram(context.path('sinogram.tsin'), sinogram)
        self.report(f"projected {image.shape} onto {geometry.n_angles} angles x "
                    f"{geometry.n_detectors} detectors")

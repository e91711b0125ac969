from ...classical import select_tv_lambda, tv_reconstruct
from ...exceptions import UsageError
from ...formats import export_pgm, write_csv, write_image
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'TV-regularized reconstruction; picks lambda by PSNR when a reference is given'
    config_flags = {'lam': 'tv_lambda', 'iterations': 'tv_iterations'}

    def add_command_arguments(self, parser):
        parser.add_argument('--sinogram', help='Input TSIN sinogram')
        parser.add_argument('--lam', type=float, help='TV weight')
        parser.add_argument('--iterations', type=int)
        parser.add_argument('--reference', help='Ground truth TIMG for the lambda grid search')

    def run(self, context, config, options):
        sinogram = self.load_sinogram(require(options, 'sinogram'), config)
        if config.get('tv_lambda') is not None:
            image = tv_reconstruct(sinogram, config.tv())
            lam = config.tv_lambda
        elif options.get('reference'):
            reference = self.load_image(options['reference'])
            lam, image, scores = select_tv_lambda(sinogram, reference, config.tv(lam=0.0))
            write_csv(context.path('tv_lambda_search.csv'),
                      [{'lambda': k, 'psnr': v} for k, v in scores.items()])
        else:
            raise UsageError("TV weight required (--lam) or a --reference for the grid search")
        context.extra['tv_lambda'] = lam
        write_image(context.path('tv.timg'), image)
        export_pgm(context.path('tv.pgm'), image)
        self.report(f"TV reconstruction with lambda {lam:g}")

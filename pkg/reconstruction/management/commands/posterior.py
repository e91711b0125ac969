import numpy as np

from ...exceptions import DivergenceError, UsageError
from ...formats import export_pgm, write_image
from ...posterior import posterior_sample
from ...solver import DataTerm
from ..base import ReconstructionCommand


class Command(ReconstructionCommand):
    help = 'Posterior mean and variance maps by Langevin sampling'
    config_flags = {'samples': 'n_samples', 'burn_in': 'burn_in', 'stride': 'stride',
                    'chains': 'n_chains'}

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', help='Trained TEBM model')
        parser.add_argument('--sinogram', help='Tomographic observation (TSIN)')
        parser.add_argument('--image', help='Noisy image observation for denoising (TIMG)')
        parser.add_argument('--samples', type=int)
        parser.add_argument('--burn-in', dest='burn_in', type=int)
        parser.add_argument('--stride', type=int)
        parser.add_argument('--chains', type=int)

    def run(self, context, config, options):
        model = self.load_model(options, config)
        if options.get('sinogram'):
            sinogram = self.load_sinogram(options['sinogram'], config)
            term = DataTerm.tomographic(sinogram, config.noise_variance(np.max(sinogram.values)))
        elif options.get('image'):
            image = self.load_image(options['image'])
            term = DataTerm.identity(image, config.noise_variance(np.max(image)))
        else:
            raise UsageError("observation required (--sinogram or --image)")

        result = posterior_sample(
            term, model, config.sampler(), config.posterior_burn_in, config.n_samples,
            config.stride, config.seed, n_chains=config.n_chains,
        )
        moments = result.moments
        write_image(context.path('posterior_mean.timg'), moments.mean)
        export_pgm(context.path('posterior_mean.pgm'), moments.mean)
        if moments.count >= 2:
            variance = moments.variance
            write_image(context.path('posterior_variance.timg'), variance)
            export_pgm(context.path('posterior_variance.pgm'), variance, 0.0,
                       max(float(variance.max()), 1e-12))
        context.extra['posterior_samples'] = moments.count
        context.extra['partial'] = result.partial
        self.report(f"accumulated {moments.count} posterior samples")
        if result.partial:
            raise DivergenceError("a posterior chain diverged; moments are partial", partial=moments)

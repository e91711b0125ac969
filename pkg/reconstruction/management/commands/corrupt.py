from pathlib import Path

from ...formats import write_csv
from ...phantoms import blobs, grid_overlay, make_mask
from ...posterior import corruption_experiment
from ..base import ReconstructionCommand, require


class Command(ReconstructionCommand):
    help = 'Compare posterior variance inside an overlaid region for clean and corrupted scans'
    config_flags = {'ntheta': 'n_angles', 'samples': 'n_samples', 'burn_in': 'burn_in'}

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', help='Trained TEBM model')
        parser.add_argument('--reference', help='Clean TIMG image')
        parser.add_argument('--overlay', default='grid-overlay',
                            help="'grid-overlay', 'blobs' or a TIMG path")
        parser.add_argument('--mask-fraction', type=float, default=0.25)
        parser.add_argument('--ntheta', type=int, help='Number of views (default 20)')
        parser.add_argument('--samples', type=int)
        parser.add_argument('--burn-in', dest='burn_in', type=int)

    def overlay(self, options, config):
        if options['overlay'] == 'grid-overlay':
            return grid_overlay(config.size)
        if options['overlay'] == 'blobs':
            return blobs(config.size, config.seed)
        return self.load_image(Path(options['overlay']))

    def run(self, context, config, options):
        model = self.load_model(options, config)
        reference = self.load_image(require(options, 'reference', 'reference image'))
        mask = make_mask(config.size, fraction=options['mask_fraction'])
        report = corruption_experiment(
            reference, self.overlay(options, config), mask, model, config.sampler(),
            noise_level=config.noise_level, n_angles=config.get('n_angles') or 20,
            burn_in=config.posterior_burn_in, n_samples=config.n_samples,
            stride=config.stride, seed=config.seed, temperature=config.beta,
        )
        write_csv(context.path('corruption_report.csv'),
                  [{'scan': scan, 'inside_variance': inside, 'outside_variance': outside}
                   for scan, inside, outside in report.rows()])
        context.extra['corruption'] = {
            'p_value': report.p_value, 'ratio_of_ratios': report.ratio_of_ratios(),
            'n_samples': report.n_samples,
        }
        if not report.inside_defined:
            self.report("mask is empty: inside-mask statistics are undefined")
        else:
            self.report(f"inside variance clean {report.clean_inside:.4e}, "
                        f"corrupted {report.corrupted_inside:.4e} (p = {report.p_value:.3g})")

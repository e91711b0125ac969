from ...classical import psnr
from ...formats import write_csv
from ..base import ReconstructionCommand, require

METHOD_FLAGS = (('FBP', 'fbp'), ('SART', 'sart'), ('TV', 'tv'), ('Ours', 'ours'))


class Command(ReconstructionCommand):
    help = 'PSNR table of reconstructions against a reference, columns FBP, SART, TV, Ours'

    def add_command_arguments(self, parser):
        parser.add_argument('--reference', help='Ground truth TIMG image')
        parser.add_argument('--label', default='', help='Problem label for the table row')
        for _, flag in METHOD_FLAGS:
            parser.add_argument(f'--{flag}', help=f'{flag.upper()} reconstruction (TIMG)')

    def run(self, context, config, options):
        reference = self.load_image(require(options, 'reference', 'reference image'))
        label = options['label'] or config.problem
        row = {'problem': label}
        for method, flag in METHOD_FLAGS:
            if not options.get(flag):
                row[method] = ''
                continue
            value = psnr(self.load_image(options[flag]), reference)
            row[method] = f"{value:.2f}"
            context.add_metric(method, label, options[flag], value)
        columns = ['problem'] + [method for method, _ in METHOD_FLAGS]
        write_csv(context.path('metrics.csv'), [row], columns)
        self.stdout.write(' '.join(f"{c:>10}" for c in columns))
        self.stdout.write(' '.join(f"{row[c]:>10}" for c in columns))

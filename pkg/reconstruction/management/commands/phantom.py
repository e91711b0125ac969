from ...formats import export_pgm, write_image
from ...phantoms import DATASET_KINDS, PHANTOM_KINDS, make_mask, make_phantom
from ..base import ReconstructionCommand


class Command(ReconstructionCommand):
    help = 'Generate a phantom image or a random discs or bars training dataset'
    config_flags = {'count': 'dataset_size'}

    def add_command_arguments(self, parser):
        parser.add_argument('--kind', choices=PHANTOM_KINDS, default='shepp-logan')
        parser.add_argument('--count', type=int, help='Number of images for --kind discs or bars')
        parser.add_argument('--mask-fraction', type=float,
                            help='Also write a centered square mask of this relative size')

    def run(self, context, config, options):
        kind = options['kind']
        result = make_phantom(kind, config.size, config.seed, count=config.dataset_size)
        if kind in DATASET_KINDS:
            for index, image in enumerate(result):
                write_image(context.path(f'dataset/image_{index:05d}.timg'), image)
            export_pgm(context.path('preview.pgm'), result[0])
            self.report(f"wrote {len(result)} {kind} images to {context.output_dir / 'dataset'}")
        else:
            write_image(context.path('phantom.timg'), result)
            export_pgm(context.path('phantom.pgm'), result)
            self.report(f"wrote {kind} phantom {config.size}x{config.size}")
        if options.get('mask_fraction') is not None:
            mask = make_mask(config.size, fraction=options['mask_fraction'])
            write_image(context.path('mask.timg'), mask.astype(float))

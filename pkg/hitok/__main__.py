"""
Point d'entrée en ligne de commande de hitok.
Une sous-commande par étape: données, tokenizer, générateur, statistiques.
"""
import argparse
import json
import logging
import os
import sys
import time

from hitok.config import DataConfig, RunConfig, SamplingParams
from hitok.core.tensor import no_grad
from hitok.data import read_dataset, split_holdout, write_dataset
from hitok.data.synth import dataset
from hitok.errors import ConfigError, HitokError
from hitok.generator import Generator, generate
from hitok.generator.pipeline import check_compatible
from hitok.masking import evaluate_masking
from hitok.metrics import evaluate
from hitok.output import (
    StatsJsonFormatter, StatsTextFormatter, TokenStreamCodec, VideoCodec, export_frames, hierarchy_stats,
)
from hitok.settings import configure_logging
from hitok.tokenizer import HierTokenizer
from hitok.tokenizer.hier_vae import HierLatents
from hitok.training import evaluate_tokenizer, train_generator, train_tokenizer

logger = logging.getLogger("hitok")

MASK_CHOICES = {'none': None, 'repeat': 'repeat_prev', 'zero': 'zero', 'learned': 'learned'}


# Codes couleur ANSI
class Colors:
    HEADER = '\033[95m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'


QUIET = False


def print_colored(text, color=''):
    """Affiche du texte en couleur (rien en mode silencieux)."""
    if not QUIET:
        print(f"{color}{text}{Colors.ENDC}")


def parse_shape(text: str):
    try:
        shape = tuple(int(v) for v in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"forme T,H,W attendue : {text}") from None
    if len(shape) != 3 or min(shape) < 1:
        raise argparse.ArgumentTypeError(f"forme T,H,W attendue : {text}")
    return shape


def load_config(path):
    return RunConfig.load(path) if path else RunConfig()


# ----------------------------------------------------------------------
# Sous-commandes
# ----------------------------------------------------------------------

def cmd_datagen(args):
    run_config = load_config(args.config)
    data = run_config.data
    run_config.data = DataConfig(count=args.count if args.count is not None else data.count,
                                 seed=args.seed if args.seed is not None else data.seed,
                                 shape=args.shape or data.shape, holdout=data.holdout)
    t, h, w = run_config.data.shape
    print_colored(f"[DONNEES]     {run_config.data.count} clips {t}x{h}x{w} (graine {run_config.data.seed})",
                  Colors.BLUE)
    items = dataset(run_config.data.seed, run_config.data.count, t, h, w)
    write_dataset(items, args.out)
    run_config.echo(os.path.join(args.out, 'config.json'))
    print_colored(f"[OK] Jeu écrit : {args.out}", Colors.GREEN)


def cmd_train_tokenizer(args):
    run_config = RunConfig.load(args.config)
    items = read_dataset(args.data)
    train, held_out = split_holdout(items, min(run_config.data.holdout, len(items) - 1))
    print_colored(f"[TOKENIZER]   {len(train)} clips d'entraînement, {len(held_out)} réservés", Colors.BLUE)
    run = train_tokenizer(run_config, [clip for clip, _ in train], out_path=args.out,
                          log_path=args.log or args.out + '.metrics.jsonl', progress=not QUIET)
    print_colored(f"[L1]          {run.initial_l1:.4f} -> {run.final_l1:.4f}", Colors.BLUE)
    if held_out:
        report = evaluate_tokenizer(run.tokenizer, [clip for clip, _ in held_out])
        print_colored(f"[PSNR]        {report['psnr']:.2f} dB", Colors.BLUE)
        if 'coarse_psnr' in report:
            print_colored(f"[GROSSIER]    {report['coarse_psnr']:.2f} dB "
                          f"(hiérarchie meilleure sur {report['hierarchy_wins']:.0%})", Colors.BLUE)
    print_colored(f"[OK] Checkpoint : {args.out}", Colors.GREEN)


def cmd_encode(args):
    tokenizer = HierTokenizer.load(args.ckpt)
    video = VideoCodec().load(args.video)
    with no_grad():
        latents = tokenizer.encode(video)
    strategy = MASK_CHOICES[args.mask]
    if strategy is not None:
        latents.masks = tokenizer.plan_masks(latents, strategy=strategy, cap=args.mask_cap, seed=args.mask_seed)
        for m, plan in sorted(latents.masks.items()):
            print_colored(f"[MASQUE]      couche {m} : {plan.masked_count}/{plan.mask.size} positions "
                          f"({plan.masked_fraction:.1%})", Colors.YELLOW)
    stream = latents.to_stream()
    TokenStreamCodec().save(stream, args.out)
    print_colored(f"[OK] Flux : {args.out} ({stream.total_tokens} jetons)", Colors.GREEN)


def cmd_decode(args):
    tokenizer = HierTokenizer.load(args.ckpt)
    stream = TokenStreamCodec().load(args.tokens)
    if [(l.quant_dim, tuple(l.latent_shape)) for l in stream.layer_configs()] != \
            [(l.quant_dim, tuple(l.latent_shape)) for l in tokenizer.cfg.layers]:
        raise ConfigError("le flux ne correspond pas à la hiérarchie du tokenizer")
    latents = HierLatents.from_stream(stream)
    video = tokenizer.decode_coarse(latents) if args.coarse_only else tokenizer.decode(latents)
    VideoCodec().save(video[0], args.out)
    print_colored(f"[OK] Clip : {args.out}", Colors.GREEN)


def cmd_train_generator(args):
    run_config = RunConfig.load(args.config)
    tokenizer = HierTokenizer.load(args.tokenizer)
    items = read_dataset(args.data)
    train, _ = split_holdout(items, min(run_config.data.holdout, len(items) - 1))
    print_colored(f"[GENERATEUR]  {len(train)} paires clip/légende", Colors.BLUE)
    run = train_generator(run_config, tokenizer, train, out_path=args.out,
                          log_path=args.log or args.out + '.metrics.jsonl', progress=not QUIET)
    print_colored(f"[CE]          {run.history[0]['total']:.4f} -> {run.history[-1]['total']:.4f}", Colors.BLUE)
    print_colored(f"[OK] Checkpoint : {args.out}", Colors.GREEN)


def cmd_generate(args):
    tokenizer = HierTokenizer.load(args.tokenizer)
    generator = Generator.load(args.gen)
    check_compatible(tokenizer, generator)
    params = SamplingParams(cfg_scale=args.cfg, temperature=args.temp, top_k=args.top_k, seed=args.seed)
    params.validate()
    print_colored(f"[LEGENDE]     {args.caption}", Colors.GREEN + Colors.BOLD)
    print_colored(f"[CFG]         {params.cfg_scale}  [TEMP] {params.temperature}  [TOP-K] {params.top_k}",
                  Colors.BLUE)
    result = generate(tokenizer, generator, args.caption, params)
    VideoCodec().save(result.video, args.out)
    if args.tokens_out:
        TokenStreamCodec().save(result.stream, args.tokens_out)
    print_colored(f"[OK] Clip : {args.out}", Colors.GREEN)


def cmd_stats(args):
    if args.video and not args.ckpt:
        raise ConfigError("--video demande --ckpt")
    if args.ckpt:
        tokenizer = HierTokenizer.load(args.ckpt)
        hierarchy = tokenizer.cfg
    elif args.config:
        hierarchy = RunConfig.load(args.config).hierarchy
    else:
        raise ConfigError("--config ou --ckpt requis")
    results = hierarchy_stats(hierarchy)
    if args.video:
        report = evaluate_masking(tokenizer, VideoCodec().load(args.video), cap=args.mask_cap, seed=args.mask_seed)
        results['effective_tokens'] = report['effective_tokens']
        results['masking'] = report
    formatter = StatsJsonFormatter() if args.json else StatsTextFormatter()
    print(formatter.format(results))
    if args.out:
        formatter.save(results, args.out)


def cmd_eval(args):
    codec = VideoCodec()
    report = evaluate(codec.load(args.ref), codec.load(args.out))
    print(json.dumps(report.to_dict(), sort_keys=True))


def cmd_export_frames(args):
    paths = export_frames(VideoCodec().load(args.video), args.out)
    print_colored(f"[OK] {len(paths)} images : {args.out}", Colors.GREEN)


# ----------------------------------------------------------------------
# Analyse des arguments
# ----------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog='hitok',
        description='Tokenizer vidéo hiérarchique et génération texte-vers-vidéo',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exemples:
  python -m hitok datagen --out data --count 256 --seed 0
  python -m hitok train-tokenizer --config configs/desk_default.json --data data --out tok.htck
  python -m hitok encode --ckpt tok.htck --video data/clip_0000.htvv --out clip.htvt --mask repeat
  python -m hitok stats --config configs/table3_multilayer.json
  python -m hitok stats --ckpt tok.htck --video data/clip_0000.htvv --out stats.txt
        """
    )
    parser.add_argument('-v', '--verbose', action='count', default=0, help='Journaux détaillés')
    parser.add_argument('--quiet', action='store_true', help='Mode silencieux (minimal output)')
    parser.add_argument('--no-color', action='store_true', help='Désactive les couleurs')
    parser.add_argument('--debug', action='store_true', help='Affiche la trace complète des erreurs')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('datagen', help='Génère un jeu de clips synthétiques')
    p.add_argument('--out', required=True)
    p.add_argument('--count', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--shape', type=parse_shape, help='T,H,W (défaut: 16,32,32)')
    p.add_argument('--config')
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser('train-tokenizer', help='Entraîne le tokenizer')
    p.add_argument('--config', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--log')
    p.set_defaults(func=cmd_train_tokenizer)

    p = sub.add_parser('encode', help='Clip -> flux de jetons HTVT')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--video', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--mask', choices=sorted(MASK_CHOICES), default='none')
    p.add_argument('--mask-cap', type=float, default=0.85)
    p.add_argument('--mask-seed', type=int, default=0)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser('decode', help='Flux de jetons -> clip HTVV')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--tokens', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--coarse-only', action='store_true', help='Couches grossières seules (couche 0 à zéro)')
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser('train-generator', help='Entraîne le générateur sur un tokenizer figé')
    p.add_argument('--config', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--tokenizer', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--log')
    p.set_defaults(func=cmd_train_generator)

    p = sub.add_parser('generate', help='Légende -> clip')
    p.add_argument('--gen', required=True)
    p.add_argument('--tokenizer', required=True)
    p.add_argument('--caption', required=True)
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--cfg', type=float, default=7.5)
    p.add_argument('--temp', type=float, default=1.0)
    p.add_argument('--top-k', type=int, default=0)
    p.add_argument('--out', required=True)
    p.add_argument('--tokens-out')
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('stats', help='Jetons par couche, taux de compression, bpp')
    p.add_argument('--config', help='Configuration (inutile avec --ckpt)')
    p.add_argument('--ckpt', help='Tokenizer entraîné: sa hiérarchie remplace --config')
    p.add_argument('--video', help='Clip HTVV: PSNR de chaque stratégie de masquage et jetons transmis')
    p.add_argument('--mask-cap', type=float, help='Plafond de masquage (défaut: celui du tokenizer)')
    p.add_argument('--mask-seed', type=int, default=0)
    p.add_argument('--json', action='store_true')
    p.add_argument('--out', help='Écrit aussi le rapport dans ce fichier')
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('eval', help='PSNR / SSIM entre deux clips')
    p.add_argument('--ref', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('export-frames', help='Clip -> images PPM')
    p.add_argument('--video', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export_frames)
    return parser


def main(argv=None):
    """Parse les arguments et lance la sous-commande."""
    global QUIET
    args = build_parser().parse_args(argv)

    # Désactive les couleurs si demandé
    if args.no_color or not sys.stdout.isatty():
        for attr in dir(Colors):
            if not attr.startswith('_'):
                setattr(Colors, attr, '')
    QUIET = args.quiet
    configure_logging(args.verbose, args.quiet)

    start_time = time.time()
    try:
        args.func(args)
    except HitokError as e:
        print(e.one_line(), file=sys.stderr)
        if args.debug:
            import traceback
            traceback.print_exc()
        return e.exit_code
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print_colored("\n[INTERROMPU] Arrêt par l'utilisateur", Colors.YELLOW)
        return 1
    logger.debug("%s terminé en %.1f s", args.command, time.time() - start_time)
    return 0


if __name__ == '__main__':
    sys.exit(main())

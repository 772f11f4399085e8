"""
Experiment configuration: argparse defaults, overridden by the ``ARGS:`` section of a
YAML file (``--config``), overridden in turn by options given explicitly on the
command line. The merged result is validated into an :class:`ExperimentConfig`.
"""
import argparse
import os
import sys
from dataclasses import dataclass, field, fields, asdict
from typing import Optional

import yaml

from . import constants
from .stft import StftConfig
from .utils import get_logger, MaskbookError

logger = get_logger(__name__)

COMMANDS = ('oracle-study', 'optimize-codebook', 'fit', 'misi', 'eval', 'gradcheck', 'synth')
PHASE_SOURCES = ('noisy', 'true', 'phasebook')
CODEBOOK_INITS = ('uniform', 'random', 'file')
MISI_INITS = ('noisy', 'zero', 'provided')
M_SOURCES = ('oracle-iam', 'provided')
HEADS = ('magphase', 'magbook', 'combook')
DEFAULT_GRAD_LOSSES = ['MSA', 'PSA', 'CMA', 'CSA', 'eCSA', 'WA', 'WA-MISI-1', 'WA-MISI-2']


class ConfigError(MaskbookError, ValueError):
    pass


def option(default, group, help, item=None, choices=None):
    metadata = {'group': group, 'help': help, 'item': item, 'choices': choices}
    if isinstance(default, list):
        return field(default_factory=lambda: list(default), metadata=metadata)
    return field(default=default, metadata=metadata)


@dataclass
class ExperimentConfig:
    command: str = option('oracle-study', 'basic', 'subcommand to run', choices=COMMANDS)
    config: Optional[str] = option(None, 'basic', 'YAML file with an ARGS: section')
    out: str = option('results', 'basic', 'output directory')
    seed: int = option(0, 'basic', 'random seed of every stochastic step')
    jobs: int = option(1, 'basic', 'parallel jobs over utterances')
    max_flags: int = option(-1, 'basic', 'largest tolerated count per degeneracy flag; -1 disables the check')

    sample_rate: int = option(constants.DEFAULT_SAMPLE_RATE, 'stft', 'sampling rate in Hz')
    win_length: int = option(constants.DEFAULT_WIN_LENGTH, 'stft', 'analysis window length in samples')
    hop: int = option(constants.DEFAULT_HOP, 'stft', 'frame shift in samples')
    dft_size: int = option(constants.DEFAULT_DFT_SIZE, 'stft', 'DFT size')
    window: str = option(constants.DEFAULT_WINDOW, 'stft', 'analysis window', choices=constants.WINDOW_KINDS)

    manifest: Optional[str] = option(None, 'corpus', 'corpus manifest; a synthetic corpus is generated when empty')
    corpus_size: int = option(constants.DEFAULT_OPT_CORPUS_SIZE, 'corpus', 'number of mixtures used from the corpus')
    synth_count: int = option(20, 'corpus', 'number of synthetic mixtures')
    synth_duration: float = option(1., 'corpus', 'synthetic mixture duration in seconds')
    source_types: list = option(list(constants.SOURCE_TYPES), 'corpus', 'synthetic source types', item=str)
    snr_range: list = option([-5., 5.], 'corpus', 'SNR range (dB) of sources 2.. against source 1', item=float)
    band_overlap: float = option(0.5, 'corpus', 'spectral overlap of synthetic sources in [0, 1]')
    n_sources: int = option(2, 'corpus', 'sources per synthetic mixture')
    subtype: str = option('float32', 'corpus', 'WAV sample format', choices=('float32', 'PCM_16'))

    mask_kinds: list = option(list(constants.MASK_KINDS), 'oracle', 'oracle masks of the study', item=str)
    r_max_list: list = option([1., 2.], 'oracle', 'magnitude truncations of IAM / ICM', item=float)
    phase_sources: list = option(list(PHASE_SOURCES), 'oracle', 'phase used with real masks', item=str)
    phasebook_sizes: list = option([4, 8], 'oracle', 'phasebook sizes of the phase-source grid', item=int)
    optimize_phasebooks: bool = option(True, 'oracle', 'also evaluate EM-optimised phasebooks')

    codebook_kind: str = option('phasebook', 'codebook', 'codebook to optimise', choices=constants.CODEBOOK_KINDS)
    codebook_size: int = option(8, 'codebook', 'number of atoms')
    magbook_size: int = option(0, 'codebook', 'magbook atoms: joint magbook/phasebook optimisation of a phasebook when > 0; fit head magbook size (3 when 0)')
    codebook_init: str = option('uniform', 'codebook', 'codebook initialisation', choices=CODEBOOK_INITS)
    codebook_path: Optional[str] = option(None, 'codebook', 'codebook file used with codebook_init=file')
    epochs: int = option(constants.DEFAULT_EM_EPOCHS, 'codebook', 'EM epochs')
    m_source: str = option('oracle-iam', 'codebook', 'magnitude masks used by phasebook EM', choices=M_SOURCES)
    r_max: float = option(constants.DEFAULT_R_MAX, 'codebook', 'magnitude truncation of the oracle targets')

    loss: str = option('WA', 'fit', 'training loss: MSA, PSA, CMA, CSA, eCSA, WA or WA-MISI-<K>')
    norm: str = option('L1', 'fit', 'loss norm', choices=constants.LOSS_NORMS)
    head: str = option('magphase', 'fit', 'estimation head', choices=HEADS)
    phasebook_size: int = option(8, 'fit', 'uniform phasebook size of the fit head')
    combook_size: int = option(12, 'fit', 'combook size of the fit head')
    trainable_atoms: bool = option(False, 'fit', 'train codebook atoms jointly with the logits')
    relu: bool = option(False, 'fit', 'constrain trained magbook atoms to be non-negative')
    step_size: float = option(1., 'fit', 'initial gradient step')
    fit_iters: int = option(200, 'fit', 'gradient descent iterations')
    fit_init: str = option('oracle', 'fit', 'initial logits: oracle (at the representation bound), random or uniform',
                           choices=constants.FIT_INITS)
    init_scale: float = option(1., 'fit', 'standard deviation of the random initial logits (fit_init: random)')
    utterances: int = option(1, 'fit', 'number of corpus mixtures to fit')

    iters: int = option(5, 'misi', 'MISI iterations K')
    init: str = option('noisy', 'misi', 'initial phases', choices=MISI_INITS)
    redistribute_at_zero: bool = option(False, 'misi', 'apply the error redistribution also for K = 0')
    mixture: Optional[str] = option(None, 'misi', 'mixture WAV; the corpus with oracle IAM magnitudes is used when empty')
    magnitudes: list = option([], 'misi', 'per-source magnitude spectrogram files', item=str)
    phases: list = option([], 'misi', 'per-source phase files for init=provided', item=str)

    estimates: Optional[str] = option(None, 'eval', 'manifest of estimated sources (id, mixture, estimates...)')

    grad_losses: list = option(DEFAULT_GRAD_LOSSES, 'gradcheck', 'loss paths to check', item=str)
    grad_step: float = option(1e-5, 'gradcheck', 'central difference step')
    grad_tol: float = option(1e-5, 'gradcheck', 'largest accepted relative error')
    grad_length: int = option(17, 'gradcheck', 'waveform length of the random problems')
    grad_win: int = option(16, 'gradcheck', 'window length of the random problems')
    grad_hop: int = option(4, 'gradcheck', 'hop of the random problems')

    def __post_init__(self):
        self.lines = {}

    def stft_config(self):
        return StftConfig(self.win_length, self.hop, self.dft_size, self.window, self.sample_rate)

    def to_dict(self):
        return asdict(self)

    def fail(self, key, message):
        where = '{}:{}: '.format(self.config, self.lines[key]) if key in self.lines else ''
        raise ConfigError('{}{} ({})'.format(where, message, key))

    def validate(self):
        for spec in fields(self):
            choices = spec.metadata.get('choices')
            if choices and getattr(self, spec.name) not in choices:
                self.fail(spec.name, '{!r} is not one of {}'.format(getattr(self, spec.name), list(choices)))
        for key, allowed in (('mask_kinds', constants.MASK_KINDS), ('phase_sources', PHASE_SOURCES),
                             ('source_types', constants.SOURCE_TYPES)):
            unknown = [value for value in getattr(self, key) if value not in allowed]
            if unknown:
                self.fail(key, 'unknown entries {}, expected a subset of {}'.format(unknown, list(allowed)))
        for key in ('jobs', 'sample_rate', 'corpus_size', 'synth_count', 'n_sources', 'utterances'):
            if getattr(self, key) < 1:
                self.fail(key, 'must be >= 1')
        for key in ('epochs', 'iters', 'fit_iters', 'codebook_size', 'magbook_size'):
            if getattr(self, key) < 0:
                self.fail(key, 'must be >= 0')
        if any(value <= 0 for value in self.r_max_list) or self.r_max <= 0:
            self.fail('r_max_list' if any(value <= 0 for value in self.r_max_list) else 'r_max', 'must be positive')
        if len(self.snr_range) != 2 or self.snr_range[0] > self.snr_range[1]:
            self.fail('snr_range', 'expected [low, high]')
        try:
            self.stft_config()
        except ValueError as error:
            self.fail('hop', str(error))
        if self.loss not in constants.GRAD_LOSS_KINDS and not self.loss.startswith('WA-MISI-'):
            self.fail('loss', 'unsupported loss {!r}'.format(self.loss))
        for key in ('manifest', 'codebook_path', 'mixture', 'estimates'):
            path = getattr(self, key)
            if path is not None and not os.path.exists(path):
                self.fail(key, 'file {} does not exist'.format(path))
        for key in ('magnitudes', 'phases'):
            missing = [path for path in getattr(self, key) if not os.path.exists(path)]
            if missing:
                self.fail(key, 'files do not exist: {}'.format(missing))
        if self.codebook_init == 'file' and self.codebook_path is None:
            self.fail('codebook_init', 'codebook_init=file needs codebook_path')
        if self.init == 'provided' and self.command == 'misi' and not self.phases:
            self.fail('init', 'init=provided needs phase files')
        return self


def str2bool(value):
    if isinstance(value, bool):
        return value
    if value.lower() in ('true', 'yes', '1'):
        return True
    if value.lower() in ('false', 'no', '0'):
        return False
    raise argparse.ArgumentTypeError('boolean value expected, got {!r}'.format(value))


def build_parser():
    parser = argparse.ArgumentParser(prog='maskbook', description='Discrete codebook representations of complex T-F masks')
    groups = {}
    for spec in fields(ExperimentConfig):
        meta = spec.metadata
        if spec.name == 'command':
            parser.add_argument('command', choices=COMMANDS, help=meta['help'])
            continue
        group = groups.setdefault(meta['group'], parser.add_argument_group(title='{} options'.format(meta['group'])))
        default = spec.default_factory() if spec.type is list else spec.default
        kwargs = {'default': default, 'help': meta['help']}
        if spec.type is list:
            kwargs.update(nargs='*', type=meta['item'])
        elif spec.type is bool:
            kwargs.update(type=str2bool)
        elif spec.type in (int, float):
            kwargs.update(type=spec.type)
        else:
            kwargs.update(type=str)
        group.add_argument('--{}'.format(spec.name), **kwargs)
    return parser


def load_yaml_args(path):
    """ARGS section of a YAML file and the line number of each of its keys."""
    if not os.path.exists(path):
        raise ConfigError('config file {} does not exist'.format(path))
    with open(path) as f:
        text = f.read()
    try:
        root = yaml.compose(text)
        content = yaml.safe_load(text) or {}
    except yaml.YAMLError as error:
        raise ConfigError('{}: cannot parse YAML: {}'.format(path, error))
    if not isinstance(content, dict) or not isinstance(content.get('ARGS', {}), dict):
        raise ConfigError('{}: expected a mapping with an ARGS section'.format(path))
    lines = {}
    if isinstance(root, yaml.MappingNode):
        for key_node, value_node in root.value:
            if key_node.value == 'ARGS' and isinstance(value_node, yaml.MappingNode):
                lines = {k.value: k.start_mark.line + 1 for k, _ in value_node.value}
    return content.get('ARGS') or {}, lines


def _coerce(spec, value):
    kind = spec.type
    if value is None:
        if spec.default is None:
            return None
        raise TypeError('null is not allowed')
    if kind is list:
        values = value if isinstance(value, list) else [value]
        return [_coerce_scalar(spec.metadata['item'], item) for item in values]
    if kind == Optional[str]:
        kind = str
    return _coerce_scalar(kind, value)


def _coerce_scalar(kind, value):
    if kind is bool:
        if not isinstance(value, bool):
            raise TypeError('expected a boolean, got {!r}'.format(value))
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError('expected an integer, got {!r}'.format(value))
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError('expected a number, got {!r}'.format(value))
        return float(value)
    if not isinstance(value, str):
        raise TypeError('expected a string, got {!r}'.format(value))
    return value


def _given_on_command_line(name, input_args):
    flag = '--{}'.format(name)
    return any(arg == flag or arg.startswith(flag + '=') for arg in input_args if isinstance(arg, str))


def parse_args(input_args=None):
    """Parses the command line, merges the YAML ARGS section and returns a validated ExperimentConfig."""
    input_args = sys.argv[1:] if input_args is None else list(input_args)
    parsed_args = build_parser().parse_args(input_args)
    values = vars(parsed_args)
    lines = {}
    if parsed_args.config:
        yaml_args, lines = load_yaml_args(parsed_args.config)
        specs = {spec.name: spec for spec in fields(ExperimentConfig)}
        for key, value in yaml_args.items():
            if key not in specs or key in ('command', 'config'):
                raise ConfigError('{}:{}: unknown key {!r}'.format(parsed_args.config, lines.get(key, '?'), key))
            # options given explicitly on the command line win over the yml
            if _given_on_command_line(key, input_args):
                continue
            try:
                values[key] = _coerce(specs[key], value)
            except TypeError as error:
                raise ConfigError('{}:{}: {} ({})'.format(parsed_args.config, lines.get(key, '?'), error, key))
    config = ExperimentConfig(**values)
    config.lines = lines
    return config.validate()

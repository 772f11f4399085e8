import pytest

from maskbook.config import ConfigError, ExperimentConfig, build_parser, parse_args, str2bool


def write_yaml(tmp_path, text):
    path = tmp_path / 'config.yml'
    path.write_text(text)
    return str(path)


def test_defaults():
    config = parse_args(['oracle-study'])
    assert isinstance(config, ExperimentConfig)
    assert config.r_max_list == [1., 2.]
    assert config.stft_config().n_bins == 129
    assert config.max_flags == -1


def test_yaml_arguments(tmp_path):
    path = write_yaml(tmp_path, 'ARGS:\n  epochs: 3\n  phasebook_sizes: [2, 16]\n  optimize_phasebooks: false\n')
    config = parse_args(['oracle-study', '--config', path])
    assert config.epochs == 3
    assert config.phasebook_sizes == [2, 16]
    assert config.optimize_phasebooks is False
    assert config.lines['epochs'] == 2


def test_command_line_wins_over_yaml(tmp_path):
    path = write_yaml(tmp_path, 'ARGS:\n  epochs: 3\n  hop: 128\n')
    config = parse_args(['fit', '--config', path, '--epochs', '7'])
    assert config.epochs == 7
    assert config.hop == 128


def test_errors_point_at_the_yaml_line(tmp_path):
    path = write_yaml(tmp_path, 'ARGS:\n  seed: 1\n  epochs: three\n')
    with pytest.raises(ConfigError, match=r'config.yml:3:'):
        parse_args(['fit', '--config', path])
    path = write_yaml(tmp_path, 'ARGS:\n  unknown_key: 1\n')
    with pytest.raises(ConfigError, match=r'config.yml:2:'):
        parse_args(['fit', '--config', path])
    path = write_yaml(tmp_path, 'ARGS:\n  window: kaiser\n')
    with pytest.raises(ConfigError, match=r'config.yml:2:'):
        parse_args(['fit', '--config', path])


def test_validation():
    with pytest.raises(ConfigError):
        parse_args(['fit', '--hop', '512'])
    with pytest.raises(ConfigError):
        parse_args(['fit', '--loss', 'SDR'])
    with pytest.raises(ConfigError):
        parse_args(['oracle-study', '--mask_kinds', 'IBM', 'XYZ'])
    with pytest.raises(ConfigError):
        parse_args(['misi', '--mixture', 'does/not/exist.wav'])
    with pytest.raises(ConfigError):
        parse_args(['optimize-codebook', '--codebook_init', 'file'])
    with pytest.raises(ConfigError):
        parse_args(['fit', '--config', 'missing.yml'])
    assert parse_args(['fit', '--loss', 'WA-MISI-3']).loss == 'WA-MISI-3'


def test_parser_and_booleans():
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(['not-a-command'])
    assert str2bool('yes') is True and str2bool('False') is False
    assert parse_args(['fit', '--trainable_atoms', 'true']).trainable_atoms is True

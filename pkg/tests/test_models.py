import json

import pytest

from models import RunConfig, RunManifest, load_config, manifest_path, write_manifest
from utils.errors import EXIT_INVALID, InvalidConfigurationError


def write_json(tmp_path, text, name='config.json'):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_config_reads_known_keys(tmp_path):
    path = write_json(tmp_path, json.dumps({'subcommand': 'solve', 'rho': 100, 'n': 257, 'eps': 0.1}))
    config = load_config(path)
    assert config.subcommand == 'solve'
    assert config.rho == 100.0
    assert isinstance(config.rho, float)
    assert config.n == 257
    assert config.eps == [0.1]
    assert config.tol is None


def test_load_config_names_the_bad_key(tmp_path):
    path = write_json(tmp_path, json.dumps({'rho': 'abc'}))
    with pytest.raises(InvalidConfigurationError) as excinfo:
        load_config(path)
    assert "'rho'" in excinfo.value.message
    assert excinfo.value.details == {'key': 'rho'}
    assert excinfo.value.exit_code == EXIT_INVALID


@pytest.mark.parametrize('data,key', [
    ({'rhoo': 1.0}, 'rhoo'),
    ({'n': 12.5}, 'n'),
    ({'n': True}, 'n'),
    ({'out': 3}, 'out'),
])
def test_load_config_rejects_unknown_or_mistyped_keys(tmp_path, data, key):
    path = write_json(tmp_path, json.dumps(data))
    with pytest.raises(InvalidConfigurationError) as excinfo:
        load_config(path)
    assert excinfo.value.details['key'] == key


def test_load_config_reports_byte_offset_of_invalid_json(tmp_path):
    with pytest.raises(InvalidConfigurationError) as excinfo:
        load_config(write_json(tmp_path, ''))
    assert excinfo.value.details['offset'] == 0

    with pytest.raises(InvalidConfigurationError) as excinfo:
        load_config(write_json(tmp_path, '{"rho": 1,}'))
    assert excinfo.value.details['offset'] == 10
    assert 'byte offset 10' in excinfo.value.message


def test_load_config_rejects_non_object_and_missing_file(tmp_path):
    with pytest.raises(InvalidConfigurationError):
        load_config(write_json(tmp_path, '[1, 2]'))
    with pytest.raises(InvalidConfigurationError):
        load_config(tmp_path / 'missing.json')


def test_merged_prefers_overrides():
    config = RunConfig(subcommand='green', r=[0.5], n=129)
    merged = config.merged({'r': [0.25], 'n': None, 'out': 'x.csv'})
    assert merged.r == [0.25]
    assert merged.n == 129
    assert merged.out == 'x.csv'
    assert config.r == [0.5]


def test_require_lists_missing_flags():
    config = RunConfig(subcommand='continue', rho_start=1.0)
    config.require('rho_start')
    with pytest.raises(InvalidConfigurationError) as excinfo:
        config.require('rho_start', 'rho_end')
    assert '--rho-end' in excinfo.value.message
    assert excinfo.value.details['missing'] == ['rho_end']


def test_manifest_round_trip(tmp_path):
    output = tmp_path / 'u.csv'
    manifest = RunManifest(config=RunConfig(subcommand='solve', rho=1.0).to_dict(), version='0.1.0',
                           duration_seconds=0.25, status='converged', exit_code=0, output=str(output),
                           details={'residual': 1e-12})
    path = write_manifest(output, manifest)
    assert path == manifest_path(output)
    assert path.name == 'u.csv.manifest.json'
    assert RunManifest.read(path) == manifest


def test_manifest_rejects_unknown_keys():
    with pytest.raises(InvalidConfigurationError):
        RunManifest.from_dict({'config': {}, 'version': '0', 'duration_seconds': 0.0, 'status': 'ok',
                               'exit_code': 0, 'extra': 1})

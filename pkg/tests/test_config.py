import os

import pytest

from src import config, presets
from src.data_loader import DataFormat
from src.exceptions import ConfigError
from src.geometry import ManifoldKind
from src.trainer import ScheduleKind
from src.utils import OUTPUT_DIR_ENV
from tests.helpers import tiny_config_text


def _violations(text, base_dir="."):
    with pytest.raises(ConfigError) as info:
        config.parse_config(text, base_dir)
    return info.value.violations


class TestParse:
    def test_tiny_config(self, tmp_path):
        run = config.parse_config(tiny_config_text(str(tmp_path)))
        assert run.manifold.kind is ManifoldKind.TORUS and run.manifold.n == 2
        assert run.encoder.input_dim == 4 and run.encoder.inner_width == 8
        assert run.train.batch_size == 16 and run.train.loss_weights.beta_r_x == 10.0
        assert run.data.synthetic == "uniform_t2" and run.data.count == 60
        assert run.output.checkpoint_path == os.path.join(str(tmp_path), "model.ckpt")

    def test_decoder_defaults_to_encoder(self, tmp_path):
        run = config.parse_config(tiny_config_text(str(tmp_path)))
        assert run.decoder == run.encoder

    def test_decoder_override(self, tmp_path):
        text = tiny_config_text(str(tmp_path)) + "\n[model.decoder]\ninner_width = 12\n"
        run = config.parse_config(text)
        assert run.decoder.inner_width == 12 and run.decoder.residual_blocks == 1

    def test_relative_data_path_is_made_absolute(self, tmp_path):
        text = tiny_config_text(str(tmp_path), {'synthetic = "uniform_t2"': 'path = "data/points.csv"'})
        run = config.parse_config(text, str(tmp_path))
        assert run.data.path == os.path.join(str(tmp_path), "data", "points.csv")
        assert run.data.format is DataFormat.EMBEDDED

    def test_environment_overrides_output_directory(self, tmp_path, monkeypatch):
        override = str(tmp_path / "elsewhere")
        monkeypatch.setenv(OUTPUT_DIR_ENV, override)
        run = config.parse_config(tiny_config_text(str(tmp_path / "configured")))
        assert run.output.directory == override

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(tiny_config_text("out", {'synthetic = "uniform_t2"': 'path = "points.csv"'}))
        run = config.load_config(str(path))
        assert run.data.path == str(tmp_path / "points.csv")


class TestPresets:
    DATA = {
        "rotations": '\n[data]\nsynthetic = "uniform_so3"\n',
        "earth": '\n[data]\nsynthetic = "vmf_s2"\n',
        "tori_t2": '\n[data]\nsynthetic = "uniform_t2"\n',
        "tori_t7": '\n[data]\npath = "angles.csv"\n',
    }

    @pytest.mark.parametrize("name", sorted(presets.PRESETS))
    def test_every_preset_builds(self, name, tmp_path):
        text = f'preset = "{name}"\n' + self.DATA.get(name, "")
        run = config.parse_config(text, str(tmp_path))
        assert run.manifold.kind.value == presets.PRESETS[name]["manifold"]["kind"]

    def test_explicit_keys_win(self):
        text = 'preset = "tori_t2"\n[train]\nstep_count = 10\n[data]\nsynthetic = "uniform_t2"\n'
        run = config.parse_config(text)
        assert run.train.step_count == 10
        assert run.train.schedule.kind is ScheduleKind.ONE_CYCLE
        assert run.encoder.residual_blocks == 6

    def test_fitted_latent(self):
        run = config.parse_config('preset = "earth"\n[data]\nsynthetic = "vmf_s2"\n')
        assert run.latent.fit_components == 5

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            presets.get_preset("nope")
        assert any("nope" in v for v in _violations('preset = "nope"\n[data]\nsynthetic = "vmf_s2"\n'))

    def test_get_preset_is_a_copy(self):
        presets.get_preset("earth")["train"]["batch_size"] = 1
        assert presets.PRESETS["earth"]["train"]["batch_size"] == 32


class TestViolations:
    def test_unknown_key(self, tmp_path):
        text = tiny_config_text(str(tmp_path), {"validation_every = 2": "validation_every = 2\nbogus = 1"})
        assert any("bogus" in v for v in _violations(text))

    def test_unknown_section(self, tmp_path):
        assert any("extras" in v for v in _violations(tiny_config_text(str(tmp_path)) + "\n[extras]\na = 1\n"))

    def test_all_violations_reported(self, tmp_path):
        text = tiny_config_text(str(tmp_path), {
            "batch_size = 16": "batch_size = 0",
            "count = 60": "count = 1",
            "emit_samples = 5": "emit_samples = -1",
        })
        violations = _violations(text)
        assert len(violations) == 3
        assert any(v.startswith("[train]") for v in violations)
        assert any(v.startswith("[data]") for v in violations)
        assert any(v.startswith("[output]") for v in violations)

    def test_bad_manifold_skips_architecture(self, tmp_path):
        violations = _violations(tiny_config_text(str(tmp_path), {'kind = "torus"': 'kind = "cube"'}))
        assert any(v.startswith("[manifold]") for v in violations)
        assert any(v.startswith("[model.encoder]") for v in violations)

    def test_path_and_synthetic_are_exclusive(self, tmp_path):
        text = tiny_config_text(str(tmp_path), {'synthetic = "uniform_t2"': 'synthetic = "uniform_t2"\npath = "a.csv"'})
        assert any("exactly one" in v for v in _violations(text))

    def test_synthetic_on_wrong_manifold(self, tmp_path):
        text = tiny_config_text(str(tmp_path), {'synthetic = "uniform_t2"': 'synthetic = "vmf_s2"'})
        assert any("vmf_s2" in v for v in _violations(text))

    def test_format_must_suit_manifold(self, tmp_path):
        text = tiny_config_text(str(tmp_path), {'synthetic = "uniform_t2"': 'path = "a.csv"\nformat = "rotmat9"'})
        assert any(v.startswith("[data]") for v in _violations(text))

    def test_fit_components_needs_vmf_mixture(self, tmp_path):
        text = tiny_config_text(str(tmp_path)) + "\n[model.latent]\nfit_components = 2\n"
        violations = _violations(text)
        assert any("vmf_mixture" in v for v in violations)
        assert any("2-sphere" in v for v in violations)

    def test_latent_incompatible_with_manifold(self, tmp_path):
        text = tiny_config_text(str(tmp_path)) + '\n[model.latent]\nkind = "wrapped_normal"\n'
        assert any(v.startswith("[model.latent]") for v in _violations(text))

    def test_toml_syntax(self):
        violations = _violations("[train\nbatch_size = 1\n")
        assert len(violations) == 1 and violations[0].startswith("TOML syntax")


class TestResolvedEcho:
    def test_hash_is_stable(self, tmp_path):
        text = tiny_config_text(str(tmp_path))
        assert config.parse_config(text).config_hash == config.parse_config(text).config_hash

    def test_hash_tracks_changes(self, tmp_path):
        first = config.parse_config(tiny_config_text(str(tmp_path)))
        second = config.parse_config(tiny_config_text(str(tmp_path), {"step_count = 4": "step_count = 5"}))
        assert first.config_hash != second.config_hash

    def test_hash_ignores_output_directory(self, tmp_path):
        first = config.parse_config(tiny_config_text(str(tmp_path / "first")))
        second = config.parse_config(tiny_config_text(str(tmp_path / "second")))
        assert first.output.directory != second.output.directory
        assert first.config_hash == second.config_hash

    def test_echo_reproduces_the_run(self, tmp_path):
        text = 'preset = "tori_t2"\n[data]\npath = "angles.csv"\n[output]\ndirectory = "out"\n'
        run = config.parse_config(text, str(tmp_path))
        digest = config.write_resolved_config(run, str(tmp_path / "echo"))
        echoed = config.load_config(str(tmp_path / "echo" / config.RESOLVED_CONFIG_NAME))
        assert echoed.config_hash == digest
        assert echoed.train == run.train and echoed.data == run.data and echoed.encoder == run.encoder
        written = (tmp_path / "echo" / config.CONFIG_HASH_NAME).read_text().strip()
        assert written == digest

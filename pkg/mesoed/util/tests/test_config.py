"""
Tests for the config module
"""
import io
from contextlib import redirect_stdout
from pathlib import Path

import pytest

import mesoed
from mesoed import config
from mesoed.util.config import (
    CONFIG_DIR,
    _find_config_files,
    _get_user_configdir,
    _is_writable_dir,
    copy_default_config,
    get_thread_count,
    load_config,
    print_config,
)
from mesoed.util.exceptions import MesoedUserWarning


def test_is_writable_dir(tmpdir):
    assert _is_writable_dir(tmpdir)
    tmp_file = tmpdir.join("hello.txt")
    # Have to write to the file otherwise its seen as a directory(?!)
    tmp_file.write("content")
    # Checks directory with a file
    assert _is_writable_dir(tmpdir)
    # Checks a filepath instead of directory
    assert not _is_writable_dir(tmp_file)


def test_default_config_is_found():
    files = _find_config_files()
    assert files[0] == str(Path(mesoed.__file__).parent / "data" / "configrc")


def test_default_sections():
    for section in ("general", "logger", "simulation", "numerics"):
        assert config.has_section(section)
    assert config.getint("simulation", "chunk_size") > 0
    assert config.getfloat("numerics", "psd_tolerance") > 0
    assert config.has_option("general", "working_dir")


def test_print_config():
    buffer = io.StringIO()
    with redirect_stdout(buffer):
        print_config()
    output = buffer.getvalue()
    assert "FILES USED:" in output
    assert "[simulation]" in output
    assert "chunk_size" in output


def test_configdir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MESOED_CONFIGDIR", str(tmp_path))
    assert _get_user_configdir() == str(tmp_path)


def test_configdir_default(monkeypatch):
    monkeypatch.delenv("MESOED_CONFIGDIR", raising=False)
    assert _get_user_configdir() == CONFIG_DIR


def test_copy_default_config(monkeypatch, tmp_path):
    monkeypatch.setenv("MESOED_CONFIGDIR", str(tmp_path))
    copy_default_config()
    assert (tmp_path / "configrc").exists()

    with pytest.warns(MesoedUserWarning, match="already exists"):
        copy_default_config()

    with pytest.warns(MesoedUserWarning, match="overwritten"):
        copy_default_config(overwrite=True)
    assert (tmp_path / "configrc.bak").exists()


def test_thread_count_precedence(monkeypatch):
    monkeypatch.delenv("MESOED_THREADS", raising=False)
    assert get_thread_count() == config.getint("simulation", "threads")

    monkeypatch.setenv("MESOED_THREADS", "3")
    assert get_thread_count() == 3
    # an explicit request wins over the environment
    assert get_thread_count(5) == 5


@pytest.mark.parametrize("requested", [0, -2])
def test_thread_count_invalid(requested):
    with pytest.raises(ValueError):
        get_thread_count(requested)


def test_user_config_overrides_and_bad_values_fall_back(monkeypatch, tmp_path):
    monkeypatch.setenv("MESOED_CONFIGDIR", str(tmp_path))
    (tmp_path / "configrc").write_text(
        "[simulation]\nthreads = 4\nchunk_size = 0\n[numerics]\npsd_tolerance = tiny\n"
    )
    with pytest.warns(MesoedUserWarning, match="chunk_size") as warn_list:
        user_config = load_config()
    assert user_config.getint("simulation", "threads") == 4
    assert user_config.getint("simulation", "chunk_size") == 2048
    assert user_config.getfloat("numerics", "psd_tolerance") == 1e-10
    assert len(warn_list) == 2

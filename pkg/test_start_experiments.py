#!/usr/bin/env python3
"""
Tests for the startup script helpers
"""

import os

import start_experiments


def test_env_file_created(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert start_experiments.check_env_file()
    text = (tmp_path / '.env').read_text()
    assert 'HFTKIN_LOG_LEVEL=INFO' in text


def test_existing_env_file_kept(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / '.env').write_text('HFTKIN_WORKERS=2\n')
    assert start_experiments.check_env_file()
    assert (tmp_path / '.env').read_text() == 'HFTKIN_WORKERS=2\n'


def test_check_recipes(tmp_path, recipes_dir):
    assert start_experiments.check_recipes(recipes_dir)
    assert not start_experiments.check_recipes(str(tmp_path / 'missing'))


def test_resolve_all_recipes(recipes_dir):
    paths = start_experiments.resolve_recipes([], recipes_dir)
    assert len(paths) == 11
    assert all(os.path.exists(p) for p in paths)


def test_resolve_by_id_and_path(recipes_dir, capsys):
    direct = os.path.join(recipes_dir, 'ziob', 'ziob_adjusted.yaml')
    paths = start_experiments.resolve_recipes(['oracle_suite', direct, 'no_such_recipe'], recipes_dir)
    assert [os.path.basename(p) for p in paths] == ['oracle_suite.yaml', 'ziob_adjusted.yaml']
    assert 'no_such_recipe' in capsys.readouterr().out

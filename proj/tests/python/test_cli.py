# Copyright 2026 The sase Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import csv
import hashlib
import json
import os
import subprocess

import numpy as np
import pytest

import sase

CLI = os.environ.get("SASE_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="SASE_CLI not set")


def run(*args, check=True):
    r = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check and r.returncode != 0:
        raise AssertionError(f"exit {r.returncode}: {r.stderr}")
    return r


def tree_digest(root):
    h = hashlib.sha256()
    for dirpath, _, files in sorted(os.walk(root)):
        for f in sorted(files):
            p = os.path.join(dirpath, f)
            h.update(p.encode())
            with open(p, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


@pytest.fixture
def workspace(tmp_path, tiny):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(tiny))
    r = run("synth-data", "--config", cfg, "--out-dir", tmp_path / "corpus")
    assert r.stdout.lstrip().startswith("{")
    echo = json.loads((tmp_path / "corpus" / "resolved_config.json").read_text())
    assert echo["command"] == "synth-data"
    assert echo["data"]["speakers"] == 3
    return tmp_path, cfg


def test_train_enhance_evaluate(workspace):
    root, cfg = workspace
    manifest = root / "corpus" / "manifest.jsonl"
    before = tree_digest(root / "corpus")
    run("train", "--config", cfg, "--manifest", manifest, "--out-dir", root / "run",
        "--override", "train.protocol=Open+SPK")
    echo = json.loads((root / "run" / "resolved_config.json").read_text())
    assert echo["config"]["train"]["protocol"] == "Open+SPK"

    mix = root / "corpus" / "wav" / "spk1_0004_mix.wav"
    run("enhance", "--checkpoint", root / "run" / "model", "--out-dir", root / "enh", "--diagnostics", mix)
    x, rate = sase.read_wav(mix)
    y, rate_out = sase.read_wav(root / "enh" / "spk1_0004_mix_enhanced.wav")
    assert len(y) == len(x) and rate_out == rate
    with open(root / "enh" / "spk1_0004_mix_posteriors.csv") as f:
        rows = list(csv.reader(f))[1:]
    assert rows
    for row in rows:
        assert abs(sum(float(v) for v in row[1:]) - 1.0) < 1e-9
    grid = np.loadtxt(root / "enh" / "spk1_0004_mix_attention_m0_h0.csv", delimiter=",", ndmin=2)
    assert grid.shape[0] == grid.shape[1] == len(rows)

    run("evaluate", "--config", cfg, "--manifest", manifest, "--checkpoint", root / "run" / "model",
        "--out-dir", root / "ev")
    with open(root / "ev" / "metrics.csv") as f:
        table = list(csv.DictReader(f))
    body, mean = table[:-1], table[-1]
    assert mean["id"] == "mean"
    for col in ("SI-SDR", "SDR", "Loss"):
        assert abs(np.mean([float(r[col]) for r in body]) - float(mean[col])) < 1e-9

    run("evaluate", "--manifest", manifest, "--noisy", "--out-dir", root / "noisy")
    with open(root / "noisy" / "metrics.csv") as f:
        first = next(csv.DictReader(f))
    clean, _ = sase.read_wav(root / "corpus" / "wav" / f"{first['id']}_clean.wav")
    noisy, _ = sase.read_wav(root / "corpus" / "wav" / f"{first['id']}_mix.wav")
    assert float(first["SI-SDR"]) == pytest.approx(sase.si_sdr(clean, noisy), abs=1e-12)

    out = run("inspect", "--checkpoint", root / "run" / "model").stdout
    assert json.loads(out)["model"]["use_spk"] is True
    out = run("inspect", "--manifest", manifest).stdout
    assert json.loads(out)["utterances"] == 15
    assert tree_digest(root / "corpus") == before


def test_verify_is_reproducible(workspace):
    root, cfg = workspace
    manifest = root / "corpus" / "manifest.jsonl"
    run("verify", "--config", cfg, "--manifest", manifest, "--out-dir", root / "v1")
    run("verify", "--config", cfg, "--manifest", manifest, "--out-dir", root / "v2")
    a = (root / "v1" / "comparison.csv").read_bytes()
    assert a == (root / "v2" / "comparison.csv").read_bytes()
    rows = list(csv.reader(a.decode().splitlines()))
    assert rows[0] == ["Method", "SI-SDR", "Loss"]
    assert [r[0] for r in rows[1:]] == ["Noisy", "Close", "Open", "Open+SPK"]
    assert (root / "v1" / "Open" / "report.json").read_bytes() == (root / "v2" / "Open" / "report.json").read_bytes()


def test_exit_codes(workspace):
    root, cfg = workspace
    manifest = root / "corpus" / "manifest.jsonl"
    assert run("train", "--bogus", check=False).returncode == 1
    assert run(check=False).returncode == 1
    assert run("train", "--config", cfg, "--manifest", manifest, "--out-dir", root / "r",
               "--override", "train.epochs=0", check=False).returncode == 1
    assert run("enhance", "--checkpoint", root / "missing", "--out-dir", root / "e",
               root / "corpus" / "wav" / "spk1_0004_mix.wav", check=False).returncode == 2
    r = run("train", "--config", cfg, "--manifest", manifest, "--out-dir", root / "nan",
            "--override", "train.learning_rate=1e300", "--override", "train.epochs=3", check=False)
    assert r.returncode == 3, r.stderr
    assert "epoch" in r.stderr

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

"""Self-adapting speech enhancement with a complex time-frequency mask."""

import json

from ._sase import (
    DataError,
    NumericalError,
    ShapeError,
    istft,
    lr_at,
    read_wav,
    sdr,
    sdr_loss,
    si_sdr,
    stft,
    write_wav,
)
from . import _sase

__all__ = [
    "DataError",
    "Model",
    "NumericalError",
    "ShapeError",
    "generate_corpus",
    "istft",
    "lr_at",
    "read_wav",
    "resolve_config",
    "sdr",
    "sdr_loss",
    "si_sdr",
    "stft",
    "train",
    "write_wav",
]


def resolve_config(config=None, overrides=()):
    """Full run configuration with defaults filled in, as a dict."""
    text = json.dumps(config) if config else ""
    return json.loads(_sase.resolve_config(text, list(overrides)))


def generate_corpus(config, out_dir):
    """Writes a synthetic corpus; returns the utterance count."""
    return _sase.generate_corpus(json.dumps(config), str(out_dir))


def train(manifest, config, out_dir=""):
    """Trains one protocol. Returns the report as a dict."""
    return json.loads(_sase.train(str(manifest), json.dumps(config), str(out_dir)))


class Model:
    """A trained model loaded from a save stem (``run/model``)."""

    def __init__(self, stem):
        self._m = _sase.Model.load(str(stem))

    @property
    def config(self):
        return json.loads(self._m.config_json)

    @property
    def parameter_count(self):
        return self._m.parameter_count

    def enhance(self, mixture):
        return self._m.enhance(mixture)

    def enhance_with_diagnostics(self, mixture):
        return self._m.enhance_with_diagnostics(mixture)

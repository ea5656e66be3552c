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

import pytest

# Small enough to train in a second or two.
TINY = {
    "data": {"speakers": 3, "per_speaker": 5, "min_seconds": 0.05, "max_seconds": 0.06, "dev_fraction": 0.2},
    "train": {"epochs": 1, "batch_size": 4, "target_speaker": 1},
    "model": {
        "feature_dim": 8,
        "heads": 2,
        "freq_bins": 33,
        "cnn_channels": [3, 4],
        "spk_channels": [2, 3],
        "recurrent_layers": 1,
        "attention_modules": 1,
    },
    "stft": {"dft_size": 64, "hop": 16, "window_length": 64},
}


@pytest.fixture
def tiny():
    import copy

    return copy.deepcopy(TINY)

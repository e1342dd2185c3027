# Copyright 2026 The otprune Authors. All Rights Reserved.
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

import math

import pytest

import otprune


def test_presets_build_and_validate():
    assert "toy_cnn" in otprune.preset_names()
    g = otprune.build_preset("toy_cnn", num_classes=4, seed=1)
    assert g.validate() == []
    flops, params = g.complexity()
    assert flops > 0 and 0 < params <= 50_000
    assert g.batchnorm_names() == ["block1.bn", "block2.bn", "block3.bn"]


def test_threshold_splits_modes():
    values = [1e-6, 1e-6, 1e-6, 0.1, 0.2]
    th = otprune.find_threshold(values)
    assert th == pytest.approx(0.1)
    stats = otprune.separation_stats(values, th)
    assert stats["alpha"] == pytest.approx(1e5)
    assert stats["beta"] == pytest.approx(2.0)
    assert stats["lower_bound"] == pytest.approx(1.5e-10)
    assert stats["upper_bound"] == pytest.approx(0.05)


def test_degenerate_and_config_errors():
    with pytest.raises(otprune.DegenerateDistribution):
        otprune.find_threshold([0.0, 0.0])
    with pytest.raises(otprune.ConfigError):
        otprune.ns_threshold([0.1, 0.2], 1.0)
    with pytest.raises(otprune.Error):
        otprune.build_preset("no_such_net")


def test_plan_apply_and_round_trip(tmp_path):
    g = otprune.build_preset("toy_cnn", num_classes=4, seed=2)
    g.set_gammas("block1.bn", [1e-6] * 12 + [0.4, 0.5, 0.6, 0.7])
    plan = otprune.plan_prune(g)
    layer = next(l for l in plan["layers"] if l["bn"] == "block1.bn")
    assert sum(layer["keep"]) == 4
    pruned = otprune.apply_prune(g, plan)
    assert pruned.validate() == []
    assert pruned.complexity()[0] < g.complexity()[0]
    pruned.save(tmp_path / "pruned")
    assert otprune.load_graph(tmp_path / "pruned") == pruned


def test_short_pipeline(tmp_path):
    reports = otprune.run_pipeline(tmp_path, samples_per_class=30, epochs=2, recover_epochs=1,
                                   post="none")
    assert len(reports) == 1
    r = reports[0]
    assert r["method"] == "OT"
    assert r["acc_post"] is None
    assert not math.isnan(r["acc_pre"])
    assert (tmp_path / "manifest.json").exists()

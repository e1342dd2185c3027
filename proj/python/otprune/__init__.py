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

"""Channel pruning driven by batch-norm scaling factors."""

from ._core import (
    ConfigError,
    DatasetError,
    DegenerateDistribution,
    Error,
    Graph,
    GraphError,
    PlanMismatch,
    SerializationError,
    ShapeError,
    TrainingDiverged,
    apply_prune,
    build_preset,
    find_threshold,
    load_graph,
    ns_threshold,
    plan_prune,
    preset_names,
    run_pipeline,
    separation_stats,
    sparse_train,
)

__all__ = [
    "ConfigError",
    "DatasetError",
    "DegenerateDistribution",
    "Error",
    "Graph",
    "GraphError",
    "PlanMismatch",
    "SerializationError",
    "ShapeError",
    "TrainingDiverged",
    "apply_prune",
    "build_preset",
    "find_threshold",
    "load_graph",
    "ns_threshold",
    "plan_prune",
    "preset_names",
    "run_pipeline",
    "separation_stats",
    "sparse_train",
]

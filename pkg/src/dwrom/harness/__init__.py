"""Configuration, persistence, pipelines and command-line interface."""

from .catalog import CATALOG, catalog_entry, preset_overrides
from .config import OnlineSpec, RunConfig, SnapshotSchedule, load_config
from .persist import load_basis, load_eim, load_snapshots, read_array, save_basis, save_eim, \
    save_snapshots, write_array
from .pipeline import (OfflineResult, RunReport, compare, draw_parameters, load_offline,
                       make_setup, offline, online, run, sweep_map)

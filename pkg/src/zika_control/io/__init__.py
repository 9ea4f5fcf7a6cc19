from .config import RunConfig, dump_config, effective_parameters, load_config, parse_config
from .csvio import HEADER, read_csv, write_csv
from .svg import emit_plots

__all__ = [
    "RunConfig", "dump_config", "effective_parameters", "load_config", "parse_config",
    "HEADER", "read_csv", "write_csv", "emit_plots",
]

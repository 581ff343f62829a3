"""
Record files written by experiment runs

Tab-separated text with a one-line header naming columns and units.
Writers append in chunks so memory stays bounded by the chunk size.
"""

import hashlib
import json
import logging
import os
import platform
from dataclasses import asdict
from typing import Any, Dict, Iterable, List, Optional

import pandas as pd

from hft_kinetics.core import TickRecord

logger = logging.getLogger(__name__)

SEPARATOR = '\t'
FLOAT_FORMAT = '%.10g'

TICK_COLUMNS = ['tick', 'time', 'interval', 'price_tpip', 'dp_tpip', 'buyer', 'seller', 'warmup']


def _tick_frame(records: Iterable[TickRecord]) -> pd.DataFrame:
    rows = [asdict(rec) for rec in records]
    frame = pd.DataFrame(rows, columns=['tick', 'time', 'interval', 'price', 'dp', 'buyer', 'seller', 'warmup'])
    frame.columns = TICK_COLUMNS
    frame['warmup'] = frame['warmup'].astype(int)
    return frame


class TableSink:
    def __init__(self, path: str, columns: List[str]):
        """
        Streaming tab-separated writer; the header goes out on creation
        """
        self.path = path
        self.columns = list(columns)
        self.rows_written = 0
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        pd.DataFrame(columns=self.columns).to_csv(path, sep=SEPARATOR, index=False)

    def write_frame(self, frame: pd.DataFrame) -> None:
        if frame.empty:
            return
        frame[self.columns].to_csv(self.path, sep=SEPARATOR, index=False, header=False, mode='a',
                                   float_format=FLOAT_FORMAT)
        self.rows_written += len(frame)


class TickSink(TableSink):
    def __init__(self, path: str):
        super().__init__(path, TICK_COLUMNS)

    def __call__(self, records: List[TickRecord]) -> None:
        self.write_frame(_tick_frame(records))


def write_samples(path: str, column: str, values) -> None:
    """One-column record file, e.g. a Langevin price-movement series"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pd.DataFrame({column: values}).to_csv(path, sep=SEPARATOR, index=False, float_format=FLOAT_FORMAT)


def read_ticks(path: str) -> List[TickRecord]:
    frame = pd.read_csv(path, sep=SEPARATOR)
    missing = set(TICK_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"{path} is not a tick record file (missing {sorted(missing)})")
    return [
        TickRecord(tick=int(row.tick), time=float(row.time), interval=float(row.interval),
                   price=float(row.price_tpip), dp=float(row.dp_tpip), buyer=int(row.buyer),
                   seller=int(row.seller), warmup=bool(row.warmup))
        for row in frame.itertuples(index=False)
    ]


def config_hash(payload: Dict[str, Any]) -> str:
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def package_versions() -> Dict[str, str]:
    import numpy
    import scipy
    import yaml

    from hft_kinetics import __version__

    return {
        'hft_kinetics': __version__,
        'python': platform.python_version(),
        'numpy': numpy.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'pyyaml': getattr(yaml, '__version__', 'unknown'),
    }


def write_manifest(directory: str, recipe_name: str, payload: Dict[str, Any], seeds: List[int],
                   wall_time: float, outputs: List[str], extra: Optional[Dict[str, Any]] = None) -> str:
    """
    manifest.json: config hash, seeds, package versions, wall time, outputs
    """
    manifest = {
        'recipe': recipe_name,
        'config_sha256': config_hash(payload),
        'config': payload,
        'seeds': seeds,
        'versions': package_versions(),
        'wall_time_seconds': round(wall_time, 3),
        'outputs': sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(directory, 'manifest.json')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
    logger.info("✅ manifest written: %s", path)
    return path

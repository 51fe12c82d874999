# -*- coding: utf-8 -*-
"""Counting metrics: MAE, RMSE, rMAE, rRMSE and R^2"""

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .const import LOGGER

REPORT_FIELDS = ['n_images', 'mae', 'rmse', 'rmae_pct', 'rrmse_pct', 'r2',
                 'n_skipped_relative']


@dataclass
class MetricsReport:
    mae: float
    rmse: float
    rmae_pct: Optional[float]
    rrmse_pct: Optional[float]
    r2: Optional[float]
    n_images: int
    n_skipped_relative: int = 0

    @property
    def r2_defined(self):
        return self.r2 is not None

    def as_dict(self):
        return asdict(self)

    def as_text(self):
        """key = value lines; undefined values are written as 'undefined'"""
        lines = []
        for key in REPORT_FIELDS:
            value = getattr(self, key)
            if value is None:
                value = 'undefined'
            elif isinstance(value, float):
                value = '%.6f' % value
            lines.append('{} = {}'.format(key, value))
        return '\n'.join(lines) + '\n'

    @staticmethod
    def csv_header():
        return ','.join(REPORT_FIELDS)

    def as_csv_row(self):
        values = [getattr(self, key) for key in REPORT_FIELDS]
        return ','.join('' if v is None else
                        ('%.6f' % v if isinstance(v, float) else str(v))
                        for v in values)


def compute_metrics(gt, pred):
    gt = np.asarray(gt, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if gt.size == 0 or gt.size != pred.size:
        raise InvalidArgumentError(
            "Need equal nonzero lengths, got {} gt and {} pred".format(
                gt.size, pred.size))
    err = gt - pred
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err ** 2)))

    nonzero = gt != 0
    skipped = int(gt.size - nonzero.sum())
    if skipped:
        LOGGER.warning("%d of %d images have zero ground truth, excluded "
                       "from relative metrics", skipped, gt.size)
    rmae = rrmse = None
    if nonzero.any():
        rel = err[nonzero] / gt[nonzero]
        rmae = float(np.mean(np.abs(rel)) * 100)
        rrmse = float(np.sqrt(np.mean(rel ** 2)) * 100)

    r2 = None
    total = np.sum((gt - gt.mean()) ** 2)
    if total > 0:
        r2 = float(1 - np.sum(err ** 2) / total)
    else:
        LOGGER.warning("R2 undefined, ground truth has zero variance")

    return MetricsReport(mae, rmse, rmae, rrmse, r2, int(gt.size), skipped)

"""
Training-curve figures for `train --plot` and the results viewer.
"""
import logging
from typing import Optional

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from .errors import DataError
from .file_io import atomic_open
from .training import TrainLog

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ['loss_ae', 'loss_cyc', 'loss_gan_x', 'loss_gan_y', 'total']
STAGE_TITLES = {1: 'Stage 1: autoencoder pre-training', 2: 'Stage 2: CycleGAN', 3: 'Stage 3: joint training'}


def smooth(frame: pd.DataFrame, window: int) -> pd.DataFrame:
    """Rolling mean of the loss columns within each stage."""
    if window <= 1:
        return frame
    smoothed = frame.copy()
    smoothed[LOSS_COLUMNS] = frame.groupby('stage')[LOSS_COLUMNS].transform(lambda col: col.rolling(window, min_periods=1).mean())
    return smoothed


def long_form(log: TrainLog, window: int=1) -> pd.DataFrame:
    """One row per (stage, iter, component) for plotting."""
    frame = smooth(log.to_frame(), window)
    return frame.melt(id_vars=['stage', 'iter'], value_vars=LOSS_COLUMNS, var_name='component', value_name='loss')


def loss_figure(log: TrainLog, window: int=25) -> plt.Figure:
    """One panel per stage that ran, one line per loss component."""
    if not len(log):
        raise DataError('training log is empty; nothing to plot')
    data = long_form(log, window)
    stages = sorted(data['stage'].unique())
    sns.set_theme(style='whitegrid')
    fig, axes = plt.subplots(1, len(stages), figsize=(5 * len(stages), 4), squeeze=False)
    for ax, stage in zip(axes[0], stages):
        panel = data[data['stage'] == stage]
        panel = panel[panel.groupby('component')['loss'].transform(lambda col: (col != 0).any())]
        sns.lineplot(data=panel, x='iter', y='loss', hue='component', ax=ax)
        ax.set_title(STAGE_TITLES.get(int(stage), f'Stage {stage}'))
        ax.set_xlabel('iteration')
    fig.tight_layout()
    return fig


def save_loss_plot(log: TrainLog, path: str, window: int=25, dpi: Optional[int]=100) -> None:
    """Write the loss curves as a PNG atomically."""
    fig = loss_figure(log, window)
    try:
        with atomic_open(path, 'wb') as handle:
            fig.savefig(handle, format='png', dpi=dpi)
    finally:
        plt.close(fig)
    logger.info(f'Wrote loss curves to {path}')

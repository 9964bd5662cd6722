import os
import glob
import logging
from typing import Dict, List

import altair as alt
import pandas as pd
import streamlit as st

from .errors import ViganError
from .metrics import REPORT_COLUMNS, EvalReport
from .model_io import read_header
from .plotting import LOSS_COLUMNS, STAGE_TITLES, long_form, loss_figure
from .session_state_manager import get_safe_session_state, record_load_error
from .training import TrainLog

logger = logging.getLogger(__name__)


def _is_report(path: str) -> bool:
    try:
        return list(pd.read_csv(path, nrows=0).columns) == REPORT_COLUMNS
    except (OSError, ValueError, pd.errors.ParserError):
        return False


def find_run_files(directory: str) -> Dict[str, List[str]]:
    """
    Collect training logs, evaluation reports and model files under a directory.

    Returns:
        dict: 'logs', 'reports' and 'models', each a sorted list of paths
    """
    if not os.path.isdir(directory):
        return {'logs': [], 'reports': [], 'models': []}
    csvs = sorted(glob.glob(os.path.join(directory, '**', '*.csv'), recursive=True))
    logs = [path for path in csvs if path.endswith('.log.csv')]
    reports = [path for path in csvs if path not in logs and _is_report(path)]
    models = sorted(glob.glob(os.path.join(directory, '**', '*.vigan'), recursive=True))
    logger.info(f'Found {len(logs)} logs, {len(reports)} reports, {len(models)} models in {directory}')
    return {'logs': logs, 'reports': reports, 'models': models}


def model_summary(header: Dict) -> pd.DataFrame:
    """One row per layer of every network in a VIGM header."""
    rows = []
    for network, layers in header['networks'].items():
        for index, (in_dim, out_dim, activation) in enumerate(layers):
            rows.append({'network': network, 'layer': index, 'in': in_dim, 'out': out_dim, 'activation': activation, 'parameters': in_dim * out_dim + out_dim})
    return pd.DataFrame(rows)


def view_training_log(path: str):
    """Loss curves per stage plus the final values of each component."""
    try:
        log = TrainLog.from_csv(path)
    except ViganError as e:
        record_load_error(path, str(e))
        st.error(str(e))
        return
    if not len(log):
        st.warning('The training log is empty.')
        return
    window = st.slider('Smoothing window (iterations)', 1, 200, value=get_safe_session_state('smoothing_window', 25), key='smoothing_slider')
    st.session_state.smoothing_window = window
    data = long_form(log, window)
    stages = sorted(int(s) for s in data['stage'].unique())
    tabs = st.tabs([STAGE_TITLES.get(stage, f'Stage {stage}') for stage in stages] + ['All stages (static)'])
    for tab, stage in zip(tabs, stages):
        with tab:
            panel = data[data['stage'] == stage]
            chart = alt.Chart(panel).mark_line().encode(x=alt.X('iter:Q', title='iteration'), y=alt.Y('loss:Q', title='loss'), color='component:N', tooltip=['iter', 'component', 'loss']).interactive()
            st.altair_chart(chart, use_container_width=True)
            last = log.for_stage(stage)[-1]
            cols = st.columns(len(LOSS_COLUMNS))
            for col, name in zip(cols, LOSS_COLUMNS):
                col.metric(name, f'{last[name]:.4f}')
    with tabs[-1]:
        st.pyplot(loss_figure(log, window))


def view_evaluation(path: str):
    """Per-method table in the V1->V2 / V2->V1 / Average layout, with a bar chart."""
    try:
        report = EvalReport.from_csv(path)
    except ViganError as e:
        record_load_error(path, str(e))
        st.error(str(e))
        return
    metrics = sorted(report.to_frame()['metric'].unique())
    if not metrics:
        st.warning('The evaluation report has no rows.')
        return
    current = get_safe_session_state('report_metric', 'rmse')
    metric = st.radio('Metric', metrics, index=metrics.index(current) if current in metrics else 0, horizontal=True, key='metric_radio')
    st.session_state.report_metric = metric
    table = report.pivot(metric)
    st.dataframe(table.style.format('{:.4f}'), use_container_width=True)
    frame = report.to_frame()
    frame = frame[frame['metric'] == metric]
    chart = alt.Chart(frame).mark_bar().encode(x=alt.X('method:N', sort='-y' if metric == 'accuracy' else 'y'), y=alt.Y('value:Q', title=metric), color='method:N', column='direction:N', tooltip=['method', 'direction', 'value', 'n'])
    st.altair_chart(chart)
    with st.expander('Raw rows'):
        st.dataframe(report.to_frame(), hide_index=True)


def view_model(path: str):
    """Header of a VIGM file: widths, layer shapes, training settings."""
    try:
        header = read_header(path)
    except ViganError as e:
        record_load_error(path, str(e))
        st.error(str(e))
        return
    layers = model_summary(header)
    col1, col2, col3, col4 = st.columns(4)
    col1.metric('View 1 width', header['dim_x'])
    col2.metric('View 2 width', header['dim_y'])
    col3.metric('Parameters', int(layers['parameters'].sum()))
    col4.metric('Trained', 'yes' if header['trained'] else 'no')
    st.subheader('Layers')
    st.dataframe(layers, hide_index=True, use_container_width=True)
    st.subheader('Columns')
    st.write({'view 1': header['x_names'], 'view 2': header['y_names']})
    if any(header['x_binary']) or any(header['y_binary']):
        st.caption('Binary columns are thresholded at 0.5 after imputation.')
    st.subheader('Hyperparameters')
    st.json(header['hyperparams'])

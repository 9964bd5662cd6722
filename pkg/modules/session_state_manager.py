import streamlit as st
import logging

logger = logging.getLogger(__name__)

PAGES = ['Home', 'Training Log', 'Evaluation', 'Model']

DEFAULT_STATE = {'current_page': 'Home', 'run_directory': '.', 'selected_log': None, 'selected_report': None, 'selected_model': None, 'smoothing_window': 25, 'report_metric': 'rmse', 'load_errors': {}}


def initialize_app_session_state():
    """
    Initialize every session state key the dashboard reads.
    Called once at the top of app.py; existing values are left untouched.
    """
    for key, value in DEFAULT_STATE.items():
        if key not in st.session_state:
            st.session_state[key] = value.copy() if isinstance(value, dict) else value
            logger.info(f'Initialized {key} in session state')


def get_safe_session_state(key, default_value=None):
    """
    Get a session state value, falling back to a default.

    Args:
        key (str): The session state key to access
        default_value: Returned when the key is absent

    Returns:
        The stored value or the default
    """
    try:
        return st.session_state[key]
    except (KeyError, AttributeError):
        logger.warning(f"Session state key '{key}' not found, using default value")
        return default_value


def record_load_error(path, message):
    errors = get_safe_session_state('load_errors', {})
    errors[path] = message
    st.session_state.load_errors = errors
    logger.error(f'Could not load {path}: {message}')


def reset_session_state():
    """Drop the file selections and cached errors, keeping the run directory."""
    for key in ('selected_log', 'selected_report', 'selected_model', 'load_errors'):
        if key in st.session_state:
            del st.session_state[key]
    initialize_app_session_state()
    logger.info('Session state has been reset')
    return True

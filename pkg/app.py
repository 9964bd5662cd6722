import streamlit as st

# Must be the first Streamlit command
st.set_page_config(layout="wide")

import os
import logging

logging.basicConfig(level=os.environ.get("VIGAN_LOG_LEVEL", "INFO").upper(),
                    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

from modules.results_viewer import find_run_files, view_evaluation, view_model, view_training_log
from modules.session_state_manager import PAGES, initialize_app_session_state, reset_session_state

initialize_app_session_state()


def navigate_to(page):
    st.session_state.current_page = page
    logger.info(f"Navigated to page: {page}")


def pick(label, paths, state_key):
    """Selectbox over discovered files; remembers the choice in session state."""
    if not paths:
        st.warning(f"No {label} found in {st.session_state.run_directory}")
        return None
    current = st.session_state.get(state_key)
    index = paths.index(current) if current in paths else 0
    choice = st.selectbox(label, paths, index=index, key=f"{state_key}_box")
    st.session_state[state_key] = choice
    return choice


# --- Sidebar ---
with st.sidebar:
    st.title("VIGAN runs")
    st.session_state.run_directory = st.text_input("Run directory", value=st.session_state.run_directory)
    found = find_run_files(st.session_state.run_directory)
    st.caption(f"{len(found['logs'])} logs, {len(found['reports'])} reports, {len(found['models'])} models")

    st.subheader("Pages")
    for page in PAGES:
        if st.button(page, use_container_width=True, key=f"nav_{page}"):
            navigate_to(page)
            st.rerun()

    st.markdown("---")
    if st.button("Reset selections", use_container_width=True):
        reset_session_state()
        st.rerun()
    if st.session_state.load_errors:
        with st.expander("Load errors"):
            for path, message in st.session_state.load_errors.items():
                st.write(f"{path}: {message}")

    st.subheader("About")
    st.info(
        "Read-only dashboard over the outputs of `python vigan.py train`, "
        "`evaluate` and `baseline`. Runs are started from the command line."
    )

# --- Main Content Area ---
page = st.session_state.current_page
if page == "Home":
    st.title("Missing-view imputation runs")
    st.write("""
    Point the sidebar at a directory holding training logs (`*.log.csv`),
    evaluation reports and model files (`*.vigan`), then open a page.
    """)
    st.code("python vigan.py gen-data --kind rotation --out runs/data\n"
            "python vigan.py train --data runs/data --out runs/model.vigan --plot runs/loss.png\n"
            "python vigan.py evaluate --model runs/model.vigan --data runs/data --out runs/report.csv\n"
            "python vigan.py baseline --method mean --data runs/data --out runs/report.csv --append",
            language="bash")
elif page == "Training Log":
    st.title("Training log")
    path = pick("Training log", found["logs"], "selected_log")
    if path:
        view_training_log(path)
elif page == "Evaluation":
    st.title("Evaluation report")
    path = pick("Evaluation report", found["reports"], "selected_report")
    if path:
        view_evaluation(path)
elif page == "Model":
    st.title("Model file")
    path = pick("Model file", found["models"], "selected_model")
    if path:
        view_model(path)
else:
    st.error(f"Unknown page: {page}")
    st.button("Go Home", on_click=navigate_to, args=("Home",))

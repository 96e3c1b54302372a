import os

import pandas as pd
import plotly.express as px
import streamlit as st

from src.models.errors import NotApplicable
from src.models.game_spec import VariantKind
from src.services.engine import GameEnv
from src.services.gamespec import BUILTIN_GAMES, apply_variant, builtin_specs
from src.services.report import curve_figure, load_results, novelty_figure
from src.utils.config import load_config
from src.utils.exports import frame_to_array, read_ppm, read_trace

# Page config
st.set_page_config(
    page_title="Object-Category Game Suite",
    layout="wide",
    initial_sidebar_state="expanded"
)

config = load_config("config.yaml")


@st.cache_data
def read_results(output_root: str):
    return load_results(output_root)


st.markdown("""
<style>
    .main-header {
        font-size: 2.2rem;
        color: #1E3A8A;
        text-align: center;
        margin-bottom: 1rem;
    }
</style>
""", unsafe_allow_html=True)

st.markdown('<h1 class="main-header">🎮 Object-Category Game Suite</h1>', unsafe_allow_html=True)
st.markdown("**Normalized scores of tabular agents vs. the pixel baseline across game variants**")

# Sidebar
with st.sidebar:
    st.header("🔧 Results")
    output_root = st.text_input("📁 Output directory", config["paths"]["output_root"])
    if st.button("🔄 Reload"):
        read_results.clear()
    st.markdown("---")
    st.header("🕹️ Preview")
    game = st.selectbox("Game", BUILTIN_GAMES)
    variant = st.selectbox("Variant", ["base", "mod-position", "mod-colorsize", "mod-image"])
    seed = st.number_input("Seed", min_value=0, value=0, step=1)

table, curves = read_results(output_root) if os.path.isdir(output_root) else (pd.DataFrame(), {})

tab1, tab2, tab3, tab4 = st.tabs(["📊 Score Table", "📈 Curves", "🖼️ Game Preview", "🎞️ Episode Trace"])

with tab1:
    if table.empty:
        st.info(f"No table.csv under {output_root}; run `python cli.py bench` first.")
    else:
        st.dataframe(table, use_container_width=True)
        numeric = table.apply(pd.to_numeric, errors="coerce")
        if numeric.notna().any().any():
            fig = px.imshow(numeric, text_auto=".2f", color_continuous_scale="RdYlGn", zmin=-0.5, zmax=1.0,
                            aspect="auto", title="Normalized score (blank cells are NA or missing)")
            st.plotly_chart(fig, use_container_width=True)

with tab2:
    if not curves:
        st.info("No curve.csv files found.")
    else:
        selected = st.multiselect("Cells", sorted(curves), default=sorted(curves)[:4])
        chosen = {name: curves[name] for name in selected}
        if chosen:
            st.plotly_chart(curve_figure(chosen), use_container_width=True)
            st.plotly_chart(novelty_figure(chosen), use_container_width=True)

with tab3:
    spec = builtin_specs(config["paths"]["specs_dir"])[game]
    try:
        spec = apply_variant(spec, VariantKind.from_name(variant, seed=int(seed)))
    except NotApplicable as exc:
        st.warning(str(exc))
    else:
        env = GameEnv(spec, seed=int(seed))
        env.reset()
        st.image(env.frame(config["engine"]["cell_px"] * 4), caption=f"{game} / {variant}", clamp=True)
        col1, col2, col3 = st.columns(3)
        with col1:
            st.metric("Grid", f"{spec.grid_width}×{spec.grid_height}")
        with col2:
            st.metric("Objects", len(env.observe()))
        with col3:
            st.metric("Max score", spec.max_score)

with tab4:
    trace_dir = st.text_input("Trace directory", help="written by `python cli.py eval --dump-trace DIR`")
    trace_path = os.path.join(trace_dir, "trace.jsonl")
    if not trace_dir or not os.path.isfile(trace_path):
        st.info("Point this at a directory holding trace.jsonl.")
    else:
        steps = pd.DataFrame(read_trace(trace_path))
        steps["score"] = steps["reward"].cumsum()
        st.plotly_chart(px.line(steps, x="step", y="score", color="level", title="Running score"),
                        use_container_width=True)
        col1, col2 = st.columns([2, 1])
        with col1:
            st.dataframe(steps, use_container_width=True, height=300)
        with col2:
            last = os.path.join(trace_dir, "last.ppm")
            if os.path.isfile(last):
                st.image(frame_to_array(read_ppm(last)), caption=f"final frame, {steps['status'].iloc[-1]}")

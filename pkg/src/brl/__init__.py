"""Balanced Ramsey experiments: colored complete graphs, minimal all-color
families, dependent random choice extraction and bound probes."""
from .graphs import (
    ColoredCompleteGraph,
    balance_report,
    is_eps_balanced,
    new_colored_complete,
    paley_graph,
    random_coloring,
    read_cgr,
    two_block_coloring,
    write_cgr,
)
from .family import blow_up, canonical_form, enumerate_family, is_vertex_critical, uses_all_colors
from .search import Embedding, Pattern, find_color_consistent, m_pattern, verify_embedding
from .drc import ExtractionConfig, MultipartiteWitness, extract_all_colors_witness, verify_witness
from .bounds import best_red_blue_cone, conjecture_probe, find_M_via_cone, lower_bound_hunt

__version__ = "0.1.0"

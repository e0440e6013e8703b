"""
Console templates for study and verification summaries
"""

# Rate study table
RATE_TABLE_HEADER = """
RATE STUDY: {family} {params}
config hash: {config_hash}
cell grid n={cell_n}, corrector residual {cell_residual:.2e}
"""

RATE_TABLE_COLUMNS = "{:>10} {:>5} {:>11} {:>11} {:>11} {:>11} {:>10}".format(
    "eps", "m", "l2_u_err", "h1_v_err", "l2_p_err", "div_v", "u0_h2")

RATE_TABLE_ROW = "{eps:>10.5g} {m:>5d} {l2_u_err:>11.3e} {h1_v_err:>11.3e} {l2_p_err:>11.3e} {div_v:>11.3e} {u0_h2:>10.4g}"

SLOPE_ROW = "  {column:<10} slope {slope:>7} r2 {r2:>7} gate {gate:>5}  {verdict}"

RATE_FOOTER = """
gates: {gates}   div identity: {div_identity}   flux: {flux}
warnings: {n_warnings}
"""

# Verification suite
CHECK_TABLE_HEADER = """
VERIFICATION SUITE
"""

CHECK_TABLE_COLUMNS = "{:<10} {:<9} {:<6} {:>7}  {}".format("check", "module", "status", "ms", "name")

CHECK_ROW = "{check_id:<10} {module:<9} {status:<6} {execution_time_ms:>7d}  {name}"

CHECK_FAILURE = "           - {failure}"

CHECK_SUMMARY = """
{passed} passed, {failed} failed, {skipped} skipped
"""

# Cell stage
CELL_SUMMARY = """
CELL PROBLEM: {family} {params} on n={n}
corrector residual: {residual:.2e}
|chi|_L2 = {chi_l2:.4e}   |pi|_L2 = {pi_l2:.4e}

a_hat (i, j, alpha, beta):
{a_hat}
symmetric eigenvalues: {eigenvalues}
"""

DUAL_SUMMARY = """
DUAL CORRECTORS: decomposition residual {decomposition_residual:.3e} (relative {decomposition_relative:.3e})
pressure relation residual {relation_residual:.3e}, adjoint gap {adjoint_symmetry:.3e}
failures: {failures}
"""

"""
Textual formats shared by the model reader, the CSV writer and the CLI.
"""

# Model file directives
PIECES = "pieces"
INDEPENDENT = "independent"
WEIGHT = "weight"
UNIFORM = "uniform"
DIRECTIVES = {PIECES, INDEPENDENT, WEIGHT, UNIFORM}
COMMENT = "#"

# AST selectors: first-hit:<piece>, max-clique, prefix:<word>
AST_FIRST_HIT = "first-hit"
AST_MAX_CLIQUE = "max-clique"
AST_PREFIX = "prefix"

# CSV floats carry 12 significant digits
FLOAT_FORMAT = ".12g"

ERGODIC_HEADER = ("quantity", "ast", "estimate", "stderr", "exact", "n", "trajectories", "seed")

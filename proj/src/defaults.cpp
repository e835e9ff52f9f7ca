#include "glyco/defaults.hpp"

// Mirrors of the files under config/. tests/test_config.cpp checks that the
// two stay identical.

namespace glyco::defaults {

const char* const element_table_text = R"cfg(# Monoisotopic element masses (Da).
# Format: <symbol> = <mass>. The key "e-" holds the electron mass used to
# turn atomic formulas into ion masses.
C = 12.0
H = 1.00782503207
N = 14.0030740048
O = 15.99491461956
Na = 22.9897692809
K = 38.96370668
Li = 7.01600455
e- = 0.00054857990946
)cfg";

const char* const residue_registry_text = R"cfg(# Residue registry.
# Format: <code> = <formula>, <methylation sites>
# The formula is the residue as incorporated in a chain (monosaccharide minus
# water). Methylation sites count the positions that carry a methyl group on a
# terminal, unsubstituted residue after permethylation; each child linkage
# removes one site and the reducing-end residue gains one.
Hex = C6H10O5, 4
HexNAc = C8H13NO5, 4
dHex = C6H10O4, 3
Pent = C5H8O4, 3
NeuAc = C11H17NO8, 6
NeuGc = C11H17NO9, 7
)cfg";

const char* const run_settings_text = R"cfg(# Run settings for the annotation engine.
ms1_tolerance = 10 ppm
msn_tolerance = 0.5 Da
max_charge = 3
max_exchanges = 3
derivatization = permethylated
max_undermethylation = 1
max_ms_level = 3
top_k = 1
threads = 1
smoothing = floor 0.1

# Charge carriers: carrier <name> charge=<int> (mass=<Da> | formula=<elements>)
carrier Na+ charge=1 formula=Na
# Neutral exchanges: exchange <name> out=<formula> in=<formula>
exchange H>Na out=H in=Na
# Neutral losses: loss <name> (mass=<Da> | formula=<elements>) max=<n> [when=permethylated]
loss H2O formula=H2O max=1
loss MeOH formula=CH4O max=1 when=permethylated

# Per-level fragmentation: level <n> types=<B,C,Y,Z> max_cleavages=<n> losses=<names> max_undermethylation=<n>
level 2 types=B,C,Y,Z max_cleavages=2 losses=H2O,MeOH max_undermethylation=1
level 3 types=B,C,Y,Z max_cleavages=2 losses=H2O,MeOH max_undermethylation=1
)cfg";

} // namespace glyco::defaults

"""End to end: simulate sessions, certify detection bounds, compute key rates.

Three sessions through the same channel:

  1. honest (no eavesdropper),
  2. a block-correlated attack (honest yields, inflated variance),
  3. a photon-number-splitting attack that blocks single-photon pulses and
     compensates on multi-photon ones so the bright source's total rate
     looks unchanged.

The estimator sees only the public transcript.  It certifies lower bounds on
vacuum and single-photon detections that hold for ANY attack, then prices
the secure key.  Against the splitting attack the single-photon bound -- and
with it the key -- collapses, which is exactly the point.
"""
from decoyqkd import (
    AttackSpec,
    ChannelParams,
    KeyRateParams,
    ProtocolConfig,
    RngStream,
    SourceSpec,
    estimate_session,
    poisson_pmf,
    simulate_session,
    total_yield,
)

CONFIG = ProtocolConfig(
    sources=(SourceSpec("U", 0.0, 0.1), SourceSpec("V", 0.1, 0.3), SourceSpec("W", 0.5, 0.6)),
    channel=ChannelParams(eta=0.1, y0=1e-5),
    K=10**6,
)
EPS = 0.01
PARAMS = KeyRateParams(kappa_ec=1.2, kappa_pa=1.0, ber=0.02, b1_max=0.03)

# splitting attack: kill single photons, raise multi-photon yields just enough
# to keep the bright source's total rate at its honest value
p_multi = 1.0 - poisson_pmf(0, 0.5) - poisson_pmf(1, 0.5)
y_comp = (total_yield(0.5, CONFIG.channel) - poisson_pmf(0, 0.5) * CONFIG.channel.y0) / p_multi
pns = {1: 0.0}
pns.update({n: min(1.0, y_comp) for n in range(2, CONFIG.n_max + 2)})

ATTACKS = [
    ("honest channel", AttackSpec("none")),
    ("block attack tau=10", AttackSpec("block_correlated", tau=10)),
    ("photon-number splitting", AttackSpec("iid", yields_override=pns)),
]

print(f"K = {CONFIG.K:.0e}, eps = {EPS}, channel eta = {CONFIG.channel.eta}")
print(f"{'scenario':<26} {'D^E':>8} {'d1 true':>9} {'d1*':>9} {'f1*':>9} {'key bits':>9}")
for i, (name, attack) in enumerate(ATTACKS):
    session = simulate_session(CONFIG, attack, RngStream(314, i))
    result = estimate_session(session.public(), CONFIG, EPS, PARAMS)
    print(f"{name:<26} {session.D_E:>8} {int(session.d_nE[1]):>9} "
          f"{result.d1_star:>9.0f} {result.f1_star:>9.0f} {result.key_length:>9.0f}")

print("\nThe certified single-photon bound d1* never exceeds the hidden truth,")
print("and the splitting attack shows up as a collapsed bound and a tiny key,")
print("even though the bright source's detection rate looked perfectly normal.")

"""Leakage-controlled daily trading simulator and agent evaluation harness.

The package is organised around one immutable :class:`~masktrade.data.market.MarketStore`
shared by every component:

- ``data``: bar ingestion, synthetic market generation, point-in-time
  features and style-factor exposures.
- ``masking``: per-episode identifier aliasing (tickers, dates) and the
  leak scanner that audits every agent-visible payload.
- ``execution``: the deterministic next-open executor with T+1, board
  price limits and fee handling.
- ``tools``: the six read-only research tools exposed to agents.
- ``harness``: the research/submission loop, scripted agents and the
  JSON-lines wire protocol for out-of-process agents.
- ``metrics``: the ten-dimensional evaluation panel plus calibration
  diagnostics.
- ``attribution``: daily cross-sectional WLS return decomposition and
  cohort exposure analysis.
- ``probe``: de-anonymization probe generation, scoring and random
  baselines.
"""

__version__ = "0.1.0"

"""Nose-landing-gear shimmy: model, observer, ZAD/MCS control and analysis."""

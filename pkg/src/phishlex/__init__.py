"""Lexical phishing-domain triage: feature extraction, from-scratch classifiers,
passive DNS aggregation and a file-watch alerting loop."""

__version__ = "0.1.0"

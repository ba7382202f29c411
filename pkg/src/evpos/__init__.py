"""Locally eventually positive matrix semigroups: certificates, detectors and models."""

"""Robust stability analysis and output-feedback stabilization of interval
fractional-order systems with time-varying delay, via LMIs."""

from folmi.interval import DelaySpec, FoSystem, IntervalMatrix, UncertaintyFactors, build_factors
from folmi.kernels import BACKEND
from folmi.schema import SystemDoc, load, loads
from folmi.sim import SimConfig, Trace, gl_coeffs, simulate, simulate_closed_loop
from folmi.stability import DelayedPair, StabilityReport, analyze_certain, analyze_interval, sector_scan
from folmi.synthesis import Controller, SynthesisResult, close_loop, synthesize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Controller",
    "DelaySpec",
    "DelayedPair",
    "FoSystem",
    "IntervalMatrix",
    "SimConfig",
    "StabilityReport",
    "SynthesisResult",
    "SystemDoc",
    "Trace",
    "UncertaintyFactors",
    "analyze_certain",
    "analyze_interval",
    "build_factors",
    "close_loop",
    "gl_coeffs",
    "load",
    "loads",
    "sector_scan",
    "simulate",
    "simulate_closed_loop",
    "synthesize",
]

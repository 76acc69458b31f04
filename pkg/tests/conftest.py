"""Shared bits for the test suite.

Kept deliberately small; most fixtures live next to the tests that use
them. Having this file here also puts tests/ on sys.path so the modules
can import the reference implementations from oracles.py.
"""

MINIMAL_TEXT = (
    "w0=workspace(XY,0,0,0)\n"
    "s0=sketch(w0,circle(0,0,0.4))\n"
    "e0=extrude(s0,0.5)\n"
    "result(e0)\n"
)

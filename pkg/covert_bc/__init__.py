#!/usr/bin/env python


"""
Covert communication over broadcast channels with a warden
"""


__name__ = "CovertBC"
__version__ = "0.3.0"

__author__ = "CovertBC contributors"
__licence__ = "MIT"

__description__ = (
    "Covert capacities, time-division optimality checks, converse bounds and"
    " desk-scale simulation for broadcast channels observed by a warden."
)
__project_url__ = "https://github.com/covert-bc/covert-bc"

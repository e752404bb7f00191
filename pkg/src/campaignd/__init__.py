"""Crowdsensing campaign orchestration service.

Experimenters define campaigns with spatial (polygons), temporal (recurring
daily windows) and volume (min/max quotas, priorities) constraints; volunteers
submit pseudonymized measurements; the service tracks per-cell completeness in
near-real time, guides volunteers toward under-covered regions and exports
anonymized data as JSON or CSV.
"""

__version__ = "0.1.0"

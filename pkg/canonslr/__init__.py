"""
Canonical-view guided multi-view continuous sign language recognition.
"""

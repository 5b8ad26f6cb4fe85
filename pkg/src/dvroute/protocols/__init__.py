"""Routing protocol state machines."""

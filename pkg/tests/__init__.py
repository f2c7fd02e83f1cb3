"""Tests for layered_mie_design"""

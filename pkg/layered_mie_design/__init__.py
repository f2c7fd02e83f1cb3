"""
layered_mie_design

Forward simulation and inverse design of multilayer spherical nanoparticles:
an exact layered-sphere Mie oracle, a two-channel neural surrogate and a
genetic algorithm with gradient fine-tuning.
"""

__version__ = "0.1.0"

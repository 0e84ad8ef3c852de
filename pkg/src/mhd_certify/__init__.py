"""Spectral toolkit for a-posteriori certificates and global stability of incompressible MHD on the torus."""

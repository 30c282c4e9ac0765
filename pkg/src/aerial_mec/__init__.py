"""Secure UAV-assisted NOMA edge computing: channel, rates, MEC accounting,
an episodic environment and a from-scratch DDPG trainer."""

__version__ = "0.1.0"

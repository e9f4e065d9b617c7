"""DDPG + hindsight experience replay with weighted real/hindsight rewards."""

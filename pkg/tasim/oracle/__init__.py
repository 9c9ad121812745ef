"""Independent numerical oracles and the cross-check suite"""

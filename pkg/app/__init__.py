"""netctrl - controllability lab for leader-follower networks"""

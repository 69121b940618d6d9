# Waveguide NLS lab

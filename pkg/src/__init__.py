"""FAE Toolkit - functional autoencoders for discretely observed curves"""

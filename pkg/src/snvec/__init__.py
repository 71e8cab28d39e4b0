"""Certified lower bounds on Schmidt-number vectors of multipartite qudit states."""

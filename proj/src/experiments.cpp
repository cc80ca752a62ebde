namespace speclab {}

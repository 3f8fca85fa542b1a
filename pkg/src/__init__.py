# source root

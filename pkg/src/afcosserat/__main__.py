from .runner_io import main

main()

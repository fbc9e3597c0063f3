from drolab.cli import main

main()

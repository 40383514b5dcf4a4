from regencore.cli import main

main()

from edcpatrol.cli import main

main()

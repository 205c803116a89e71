"""Reference strings shared by several test modules."""

UC5_R_1_CONTRACT = (
    'guarantee "UC5_R_1" ((H(not(((sensorfaults) and (trackingPilotCommands))))) or '
    "(not(SI(((((sensorfaults) and (trackingPilotCommands))) and "
    "((pre(not(((sensorfaults) and (trackingPilotCommands))))) or FTP)), "
    "(not((controlObjectives)))))));"
)


def squash(text: str) -> str:
    return " ".join(text.split())

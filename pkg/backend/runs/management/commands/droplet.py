from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Droplet energies and band widths of the XXZ chain against the closed forms."
    subcommand = "droplet"
    sections = ("model", "droplet")

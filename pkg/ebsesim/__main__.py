from ebsesim.cli import ebsesim

if __name__ == '__main__':
    ebsesim()
